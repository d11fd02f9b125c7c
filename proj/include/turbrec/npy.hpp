#pragma once

#include <filesystem>

#include "turbrec/tensor.hpp"

namespace turb {

// NPY format version 1.0, dtype '<f8', C order. save followed by load is a
// bit-exact round trip; writing the same tensor twice produces identical
// files byte for byte.
void npy_save(const std::filesystem::path& path, const Tensor& t);
Tensor npy_load(const std::filesystem::path& path);

}  // namespace turb
