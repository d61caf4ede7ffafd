#pragma once

#include <cstdint>

#include "dimts/array.hpp"

namespace dimts {

/// Counter-based generator: each 64-bit output is a pure function of
/// (seed, counter), so the full state serializes as two integers and a
/// checkpointed run resumes bit-exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    /// Independent stream derived from a base seed, used to decorrelate
    /// e.g. parallel sampling chains or per-purpose draws.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }
    void set_counter(std::uint64_t c) noexcept { counter_ = c; }

    std::uint64_t next_u64();
    double uniform01();                         // [0, 1)
    double normal();                            // standard normal, Box-Muller
    std::uint64_t uniform_int(std::uint64_t n); // [0, n)

    DenseArray normal_array(Shape shape);
    DenseArray uniform_array(Shape shape, double lo, double hi);

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace dimts
