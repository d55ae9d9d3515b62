#include "sketchscene/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <atomic>
#include <unistd.h>

#include "sketchscene/errors.hpp"

namespace sketchscene {

bool Mask::is_binary() const {
    return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b <= 1; });
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

Rect intersect(const Rect& a, const Rect& b) {
    const int l = std::max(a.left, b.left);
    const int t = std::max(a.top, b.top);
    const int r = std::min(a.right(), b.right());
    const int bt = std::min(a.bottom(), b.bottom());
    if (r <= l || bt <= t) return Rect{l, t, 0, 0};
    return Rect{l, t, r - l, bt - t};
}

namespace {

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_error_throw(png_structp, png_const_charp msg) {
    throw IoError(std::string("png: ") + msg);
}

void png_warning_ignore(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode_raw(int width, int height, int color_type, int channels,
                                     const std::uint8_t* pixels) {
    if (width <= 0 || height <= 0) throw ShapeError("cannot encode empty raster");
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
    png_infop info  = png_create_info_struct(png);
    try {
        png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
        png_set_compression_level(png, 6);
        png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(width) * channels;
        for (int y = 0; y < height; ++y) {
            png_write_row(png, const_cast<png_bytep>(pixels + stride * y));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->offset + length > cur->bytes.size()) png_error(png, "truncated data");
    std::memcpy(data, cur->bytes.data() + cur->offset, length);
    cur->offset += length;
}

// Decodes to 8-bit with the requested channel count (1 = gray, 3 = RGB).
std::vector<std::uint8_t> decode_raw(std::span<const std::uint8_t> bytes, int want_channels, int& width,
                                     int& height) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG stream");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
    png_infop info  = png_create_info_struct(png);
    std::vector<std::uint8_t> pixels;
    ReadCursor cursor{bytes, 0};
    try {
        png_set_read_fn(png, &cursor, png_read_from_span);
        png_read_info(png, info);
        const auto color = png_get_color_type(png, info);
        const auto depth = png_get_bit_depth(png, info);
        if (depth == 16) png_set_strip_16(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
        const bool src_gray = (color & PNG_COLOR_MASK_COLOR) == 0;
        if (want_channels == 3 && src_gray) png_set_gray_to_rgb(png);
        if (want_channels == 1 && !src_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
        png_read_update_info(png, info);
        width  = static_cast<int>(png_get_image_width(png, info));
        height = static_cast<int>(png_get_image_height(png, info));
        const auto rowbytes = png_get_rowbytes(png, info);
        if (rowbytes != static_cast<png_size_t>(width) * want_channels) png_error(png, "unexpected row layout");
        pixels.resize(rowbytes * height);
        for (int y = 0; y < height; ++y) png_read_row(png, pixels.data() + rowbytes * y, nullptr);
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    return encode_raw(img.width, img.height, PNG_COLOR_TYPE_GRAY, 1, img.pixels.data());
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    return encode_raw(img.width, img.height, PNG_COLOR_TYPE_RGB, 3, img.pixels.data());
}

std::vector<std::uint8_t> encode_png(const Mask& mask) {
    std::vector<std::uint8_t> scaled(mask.bits.size());
    std::transform(mask.bits.begin(), mask.bits.end(), scaled.begin(),
                   [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
    return encode_raw(mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 1, scaled.data());
}

GrayImage decode_png_gray(std::span<const std::uint8_t> bytes) {
    GrayImage img;
    img.pixels = decode_raw(bytes, 1, img.width, img.height);
    return img;
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
    RgbImage img;
    img.pixels = decode_raw(bytes, 3, img.width, img.height);
    return img;
}

Mask decode_png_mask(std::span<const std::uint8_t> bytes) {
    Mask m;
    m.bits = decode_raw(bytes, 1, m.width, m.height);
    for (auto& b : m.bits) b = b ? 1 : 0;
    return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    static std::atomic<unsigned> counter{0};
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

RgbImage resize_bilinear(const RgbImage& src, const Rect& from, int dst_w, int dst_h) {
    RgbImage out(dst_w, dst_h);
    const double sx = static_cast<double>(from.width) / dst_w;
    const double sy = static_cast<double>(from.height) / dst_h;
    for (int y = 0; y < dst_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(from.height - 1));
        const int y0    = static_cast<int>(fy);
        const int y1    = std::min(y0 + 1, from.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < dst_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(from.width - 1));
            const int x0    = static_cast<int>(fx);
            const int x1    = std::min(x0 + 1, from.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = src.at(from.left + x0, from.top + y0, c) * (1 - wx) + src.at(from.left + x1, from.top + y0, c) * wx;
                const double bot = src.at(from.left + x0, from.top + y1, c) * (1 - wx) + src.at(from.left + x1, from.top + y1, c) * wx;
                out.at(x, y, c)  = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bot * wy));
            }
        }
    }
    return out;
}

Mask resize_nearest(const Mask& src, const Rect& from, int dst_w, int dst_h) {
    Mask out(dst_w, dst_h);
    for (int y = 0; y < dst_h; ++y) {
        const int sy = from.top + nearest_source(y, from.height, dst_h);
        for (int x = 0; x < dst_w; ++x) out.at(x, y) = src.at(from.left + nearest_source(x, from.width, dst_w), sy);
    }
    return out;
}

GrayImage resize_nearest(const GrayImage& src, const Rect& from, int dst_w, int dst_h) {
    GrayImage out(dst_w, dst_h);
    for (int y = 0; y < dst_h; ++y) {
        const int sy = from.top + nearest_source(y, from.height, dst_h);
        for (int x = 0; x < dst_w; ++x) out.at(x, y) = src.at(from.left + nearest_source(x, from.width, dst_w), sy);
    }
    return out;
}

GrayImage to_gray(const RgbImage& img) {
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const int sum = img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2);
            out.at(x, y)  = static_cast<std::uint8_t>((sum + 1) / 3);
        }
    return out;
}

RgbImage to_rgb(const GrayImage& img) {
    RgbImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = img.pixels[i];
    return out;
}

}  // namespace sketchscene
