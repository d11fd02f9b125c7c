#pragma once

#include <string>

#include "turbrec/field.hpp"
#include "turbrec/image.hpp"

namespace turb::img {

enum class DegradeMode { kTilt, kBlur, kTiltBlur };

DegradeMode parse_degrade_mode(const std::string& name);  // "tilt", "blur", "tilt+blur"
std::string degrade_mode_name(DegradeMode mode);

struct BlurParams {
  double sigma = 1.0;
  int ksize = 5;
};

// Backward warping: output(y,x) samples the input bilinearly at
// (y + dy(y,x), x + dx(y,x)). Samples outside the frame clamp to the border
// pixel; the all-zero map is a bit-exact identity.
Image apply_tilt(const Image& img, const field::TiltMap& tilt);

// Separable Gaussian filter, kernel normalized to sum 1, border replicate.
Image gaussian_blur(const Image& img, double sigma, int ksize);

// Tilt-then-blur composition; mode selects which stages run.
Image degrade(const Image& img, const field::TiltMap& tilt, const BlurParams& blur,
              DegradeMode mode);

}  // namespace turb::img
