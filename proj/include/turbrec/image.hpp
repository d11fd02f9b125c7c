#pragma once

#include <filesystem>

#include "turbrec/tensor.hpp"

namespace turb::img {

// Grayscale (1 channel) or RGB (3 channel) image with pixels in [0,1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  Tensor pixels;  // [C,H,W]

  static Image zeros(int channels, int height, int width);
  static Image from_tensor(Tensor t);  // [C,H,W], values clamped to [0,1]
  void validate() const;
};

// Channel-mean reduction to a single channel; identity for grayscale input.
Image to_grayscale(const Image& img);

// Binary PGM (P5) / PPM (P6), 8-bit, maxval 255; values map to [0,1] by /255.
// NPY images are float tensors of dims [C,H,W] or [H,W]. Format chosen by
// extension (.pgm/.ppm/.npy) on both load and save.
Image load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& img);

}  // namespace turb::img
