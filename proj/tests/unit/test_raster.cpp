#include <doctest.h>

#include "fixtures.hpp"
#include "sketchscene/errors.hpp"
#include "sketchscene/raster.hpp"

using namespace sketchscene;
using namespace sketchscene::testing;

TEST_CASE("png round-trips gray, rgb and mask rasters") {
    Rng rng(1);
    const RgbImage rgb = random_rgb(37, 21, rng);
    CHECK(decode_png_rgb(encode_png(rgb)) == rgb);

    GrayImage gray(19, 33);
    for (auto& p : gray.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    CHECK(decode_png_gray(encode_png(gray)) == gray);

    const Mask mask = random_mask(40, 12, rng);
    CHECK(decode_png_mask(encode_png(mask)) == mask);
}

TEST_CASE("png encoding is deterministic") {
    Rng rng(2);
    const RgbImage rgb = random_rgb(16, 16, rng);
    CHECK(encode_png(rgb) == encode_png(rgb));
}

TEST_CASE("png decoding converts between channel layouts") {
    GrayImage gray(4, 4, 90);
    const RgbImage rgb = decode_png_rgb(encode_png(gray));
    CHECK(rgb.at(2, 3, 0) == 90);
    CHECK(rgb.at(2, 3, 2) == 90);
    RgbImage colour(3, 3, 0);
    colour.at(1, 1, 0) = 60;
    colour.at(1, 1, 1) = 60;
    colour.at(1, 1, 2) = 60;
    CHECK(decode_png_gray(encode_png(colour)).at(1, 1) == 60);
}

TEST_CASE("png decoding rejects garbage") {
    const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK_THROWS_AS(decode_png_rgb(junk), IoError);
    CHECK_THROWS_AS(encode_png(RgbImage{}), ShapeError);
}

TEST_CASE("atomic writes replace file contents") {
    TempDir dir("raster");
    const auto path = dir / "nested" / "file.bin";
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, std::string("first"));
    write_file_atomic(path, std::string("second"));
    const auto bytes = read_file(path);
    CHECK(std::string(bytes.begin(), bytes.end()) == "second");
    int leftovers = 0;
    for (const auto& e : std::filesystem::directory_iterator(path.parent_path())) leftovers += e.path() != path;
    CHECK(leftovers == 0);
    CHECK_THROWS_AS(read_file(dir / "missing"), NotFoundError);
}

TEST_CASE("nearest resampling to the same size is the identity") {
    Rng rng(3);
    const Mask m = random_mask(20, 14, rng);
    CHECK(resize_nearest(m, Rect{0, 0, 20, 14}, 20, 14) == m);
    CHECK(nearest_source(0, 10, 5) == 1);
    CHECK(nearest_source(4, 10, 5) == 9);
    CHECK(nearest_source(3, 4, 8) == 1);
}

TEST_CASE("bilinear resampling preserves constant images") {
    RgbImage img(9, 7, 0);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) {
            img.at(x, y, 0) = 10;
            img.at(x, y, 1) = 200;
            img.at(x, y, 2) = 77;
        }
    const RgbImage out = resize_bilinear(img, Rect{1, 1, 6, 5}, 17, 3);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            CHECK(out.at(x, y, 0) == 10);
            CHECK(out.at(x, y, 1) == 200);
            CHECK(out.at(x, y, 2) == 77);
        }
}

TEST_CASE("crop and intersect") {
    Rng rng(4);
    const RgbImage img = random_rgb(10, 10, rng);
    const RgbImage c   = crop(img, Rect{2, 3, 4, 5});
    CHECK(c.width == 4);
    CHECK(c.at(0, 0, 1) == img.at(2, 3, 1));
    CHECK(c.at(3, 4, 2) == img.at(5, 7, 2));
    CHECK(intersect(Rect{-5, -5, 10, 10}, Rect{0, 0, 8, 8}) == Rect{0, 0, 5, 5});
    CHECK(intersect(Rect{20, 20, 3, 3}, Rect{0, 0, 8, 8}).empty());
}
