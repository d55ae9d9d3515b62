#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sketchscene/diffusion.hpp"

namespace sketchscene {

// Little-endian binary tensor file:
//   "SSTN" | u32 version=1 | u32 ndim | u64 dims[ndim] | f64 data[prod(dims)]
struct TensorFile {
    std::vector<std::uint64_t> shape;
    std::vector<double> data;

    friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

std::vector<std::uint8_t> encode_tensor(const TensorFile& t);
TensorFile decode_tensor(std::span<const std::uint8_t> bytes);

TensorFile to_tensor_file(const LatentTensor& z);
LatentTensor to_latent(const TensorFile& t);

}  // namespace sketchscene
