#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sketchscene {

// Interleaved 8-bit raster with a compile-time channel count.
template <int Channels>
struct Image {
    static constexpr int channels = Channels;

    int width  = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * Channels, fill) {}

    bool empty() const { return width == 0 || height == 0; }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * Channels + c;
    }
    std::uint8_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

using GrayImage = Image<1>;
using RgbImage  = Image<3>;

// Binary raster; every pixel is 0 or 1. Stored as {0,255} on disk.
struct Mask {
    int width  = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h, std::uint8_t fill = 0) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }

    bool is_binary() const;
    std::size_t count() const;

    friend bool operator==(const Mask&, const Mask&) = default;
};

// Pixel-space rectangle; may extend beyond a canvas until clipped.
struct Rect {
    int left   = 0;
    int top    = 0;
    int width  = 0;
    int height = 0;

    int right() const { return left + width; }
    int bottom() const { return top + height; }
    bool empty() const { return width <= 0 || height <= 0; }

    friend bool operator==(const Rect&, const Rect&) = default;
};

Rect intersect(const Rect& a, const Rect& b);

// PNG codec. Encoding is deterministic (fixed compression, no time chunk).
std::vector<std::uint8_t> encode_png(const GrayImage& img);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
std::vector<std::uint8_t> encode_png(const Mask& mask);

GrayImage decode_png_gray(std::span<const std::uint8_t> bytes);
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);
// Any nonzero sample becomes 1.
Mask decode_png_mask(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Write-to-temp then rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

template <int C>
Image<C> crop(const Image<C>& src, const Rect& r) {
    Image<C> out(r.width, r.height);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            for (int c = 0; c < C; ++c) out.at(x, y, c) = src.at(r.left + x, r.top + y, c);
    return out;
}

// Resamples the source sub-rectangle `from` into a dst_w x dst_h image.
RgbImage resize_bilinear(const RgbImage& src, const Rect& from, int dst_w, int dst_h);
// Nearest-neighbour index mapping used by every exact resampling path:
// dst i -> src floor((2i+1) * src_n / (2 * dst_n)).
inline int nearest_source(int i, int src_n, int dst_n) {
    return static_cast<int>((2LL * i + 1) * src_n / (2LL * dst_n));
}
Mask resize_nearest(const Mask& src, const Rect& from, int dst_w, int dst_h);
GrayImage resize_nearest(const GrayImage& src, const Rect& from, int dst_w, int dst_h);

GrayImage to_gray(const RgbImage& img);
RgbImage to_rgb(const GrayImage& img);

}  // namespace sketchscene
