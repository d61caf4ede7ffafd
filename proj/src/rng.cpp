#include "dimts/rng.hpp"

#include <cmath>
#include <numbers>

#include "dimts/errors.hpp"

namespace dimts {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(mix64(seed ^ mix64(stream_id)));
}

std::uint64_t Rng::next_u64() {
    return mix64(seed_ + 0x9e3779b97f4a7c15ull * ++counter_);
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    // Box-Muller without pair caching keeps draw count a pure function of
    // how many normals were requested, which the checkpoint counter relies on.
    double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw numeric_error("uniform_int requires n > 0");
    // Rejection sampling to avoid modulo bias.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

DenseArray Rng::normal_array(Shape shape) {
    DenseArray out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal();
    return out;
}

DenseArray Rng::uniform_array(Shape shape, double lo, double hi) {
    DenseArray out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lo + (hi - lo) * uniform01();
    return out;
}

}  // namespace dimts
