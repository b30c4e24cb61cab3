#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mats/numerics/tensor.hpp"

namespace mats {

// Binary PPM (P6, maxval 255) <-> H x W x 3 tensor in [0, 1].
Tensor parse_ppm(std::string_view bytes);
std::string encode_ppm(const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& image);

}  // namespace mats
