#include "dimts/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "dimts/errors.hpp"

namespace dimts {

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'I', 'M', 'T', 'S', 'C', 'K', 'P'};
constexpr char kTensorMagic[8] = {'D', 'I', 'M', 'T', 'S', 'T', 'E', 'N'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_pod(std::ofstream& os, T v) {
    write_bytes(os, &v, sizeof(T));
}

void read_bytes(std::ifstream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw data_error(std::string("truncated file while reading ") + what);
}

template <class T>
T read_pod(std::ifstream& is, const char* what) {
    T v;
    read_bytes(is, &v, sizeof(T), what);
    return v;
}

void write_shape_and_data(std::ofstream& os, const DenseArray& a) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(a.ndim()));
    for (std::size_t d = 0; d < a.ndim(); ++d) write_pod<std::uint64_t>(os, a.dim(d));
    write_bytes(os, a.data(), a.size() * sizeof(double));
}

DenseArray read_shape_and_data(std::ifstream& is, const char* what) {
    auto ndim = read_pod<std::uint32_t>(is, what);
    if (ndim == 0 || ndim > 8) throw data_error("invalid tensor rank in file");
    Shape shape(ndim);
    for (auto& d : shape) d = read_pod<std::uint64_t>(is, what);
    DenseArray a(shape);
    read_bytes(is, a.data(), a.size() * sizeof(double), what);
    return a;
}

std::ifstream open_for_read(const std::string& path, const char magic[8]) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open '" + path + "'");
    char got[8];
    read_bytes(is, got, 8, "magic");
    if (std::memcmp(got, magic, 8) != 0) throw data_error("'" + path + "' has wrong file type");
    auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw data_error("'" + path + "' has unsupported version " + std::to_string(version));
    return is;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("cannot write '" + path + "'");
    write_bytes(os, kCheckpointMagic, 8);
    write_pod<std::uint32_t>(os, kVersion);

    std::string meta = ck.meta.dump();
    write_pod<std::uint64_t>(os, meta.size());
    write_bytes(os, meta.data(), meta.size());

    write_pod<std::uint64_t>(os, ck.params.size());
    for (const auto& [name, value] : ck.params) {
        write_pod<std::uint64_t>(os, name.size());
        write_bytes(os, name.data(), name.size());
        write_shape_and_data(os, value);
    }
    if (!os) throw data_error("write failed for '" + path + "'");
    os.close();

    std::ofstream sidecar(path + ".json", std::ios::trunc);
    if (!sidecar) throw data_error("cannot write '" + path + ".json'");
    sidecar << ck.meta.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is = open_for_read(path, kCheckpointMagic);
    Checkpoint ck;

    auto meta_len = read_pod<std::uint64_t>(is, "meta length");
    std::string meta(meta_len, '\0');
    read_bytes(is, meta.data(), meta_len, "meta");
    ck.meta = nlohmann::json::parse(meta, nullptr, /*allow_exceptions=*/false);
    if (ck.meta.is_discarded()) throw data_error("corrupt metadata in '" + path + "'");

    auto n = read_pod<std::uint64_t>(is, "parameter count");
    ck.params.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        auto name_len = read_pod<std::uint64_t>(is, "parameter name");
        std::string name(name_len, '\0');
        read_bytes(is, name.data(), name_len, "parameter name");
        ck.params.emplace_back(std::move(name), read_shape_and_data(is, "parameter data"));
    }
    return ck;
}

void save_tensor(const std::string& path, const DenseArray& a) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("cannot write '" + path + "'");
    write_bytes(os, kTensorMagic, 8);
    write_pod<std::uint32_t>(os, kVersion);
    write_shape_and_data(os, a);
    if (!os) throw data_error("write failed for '" + path + "'");
}

DenseArray load_tensor(const std::string& path) {
    std::ifstream is = open_for_read(path, kTensorMagic);
    return read_shape_and_data(is, "tensor");
}

}  // namespace dimts
