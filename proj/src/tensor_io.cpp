#include "ggt/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace ggt {

namespace {

constexpr std::array<char, 4> kMagic{'G', 'G', 'T', '1'};
constexpr std::uint32_t kMaxRank = 16;

void put_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw FormatError(std::string("GGT1: truncated ") + what);
    return std::uint32_t(bytes[0]) | std::uint32_t(bytes[1]) << 8 | std::uint32_t(bytes[2]) << 16 |
           std::uint32_t(bytes[3]) << 24;
}

} // namespace

std::size_t ggt1_record_size(const Shape& shape) {
    return 4 + 4 + 4 * shape.size() + 4 * checked_numel(shape);
}

void write_ggt1(std::ostream& out, const TensorF& t) {
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) {
        if (e > std::numeric_limits<std::uint32_t>::max()) throw FormatError("GGT1: extent exceeds u32");
        put_u32(out, static_cast<std::uint32_t>(e));
    }
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    if (!out) throw FormatError("GGT1: write failed");
}

TensorF read_ggt1(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4)) throw FormatError("GGT1: truncated magic");
    if (magic != kMagic) throw FormatError("GGT1: bad magic (expected 'GGT1')");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError("GGT1: unsupported rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& e : shape) {
        e = get_u32(in, "extent");
        if (e == 0) throw FormatError("GGT1: zero extent");
    }
    const std::size_t n = checked_numel(shape);
    std::vector<float> data(n);
    for (auto& v : data) v = std::bit_cast<float>(get_u32(in, "payload"));
    return TensorF(std::move(shape), std::move(data));
}

template <typename T>
void save_ggt1(const std::filesystem::path& path, const BasicTensor<T>& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    write_ggt1(out, t.template cast<float>());
}

template <typename T>
BasicTensor<T> load_ggt1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_ggt1(in).template cast<T>();
}

template void save_ggt1(const std::filesystem::path&, const Tensor&);
template void save_ggt1(const std::filesystem::path&, const TensorF&);
template Tensor load_ggt1(const std::filesystem::path&);
template TensorF load_ggt1(const std::filesystem::path&);

} // namespace ggt
