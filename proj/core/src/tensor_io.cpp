#include "sketchscene/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <functional>
#include <numeric>

#include "sketchscene/errors.hpp"

namespace sketchscene {

namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& off) {
    if (off + sizeof(T) > bytes.size()) throw ParseError("tensor file truncated", off);
    T v;
    std::memcpy(&v, bytes.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const TensorFile& t) {
    const std::uint64_t n = std::accumulate(t.shape.begin(), t.shape.end(), std::uint64_t{1}, std::multiplies<>{});
    if (n != t.data.size()) throw ShapeError("tensor shape does not match data length");
    std::vector<std::uint8_t> out{'S', 'S', 'T', 'N'};
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    for (double v : t.data) put<double>(out, v);
    return out;
}

TensorFile decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "SSTN", 4) != 0) throw ParseError("bad tensor magic", 0);
    std::size_t off = 4;
    const auto version = take<std::uint32_t>(bytes, off);
    if (version != 1) throw VersionError("tensor file version " + std::to_string(version) + " unsupported");
    const auto ndim = take<std::uint32_t>(bytes, off);
    if (ndim > 8) throw ParseError("tensor rank too large", off);
    TensorFile t;
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        t.shape.push_back(take<std::uint64_t>(bytes, off));
        n *= t.shape.back();
    }
    if (n > (bytes.size() - off) / sizeof(double)) throw ParseError("tensor file truncated", off);
    t.data.resize(n);
    for (auto& v : t.data) v = take<double>(bytes, off);
    if (off != bytes.size()) throw ParseError("trailing bytes after tensor data", off);
    return t;
}

TensorFile to_tensor_file(const LatentTensor& z) {
    return TensorFile{{static_cast<std::uint64_t>(z.channels), static_cast<std::uint64_t>(z.height),
                       static_cast<std::uint64_t>(z.width)},
                      z.data};
}

LatentTensor to_latent(const TensorFile& t) {
    if (t.shape.size() != 3) throw ShapeError("latent tensor must have rank 3");
    LatentTensor z(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]), static_cast<int>(t.shape[2]));
    z.data = t.data;
    return z;
}

}  // namespace sketchscene
