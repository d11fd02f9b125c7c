#include "turbrec/warp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace turb::img {

DegradeMode parse_degrade_mode(const std::string& name) {
  if (name == "tilt") return DegradeMode::kTilt;
  if (name == "blur") return DegradeMode::kBlur;
  if (name == "tilt+blur") return DegradeMode::kTiltBlur;
  throw std::invalid_argument("unknown degrade mode: " + name);
}

std::string degrade_mode_name(DegradeMode mode) {
  switch (mode) {
    case DegradeMode::kTilt: return "tilt";
    case DegradeMode::kBlur: return "blur";
    case DegradeMode::kTiltBlur: return "tilt+blur";
  }
  throw std::logic_error("bad DegradeMode");
}

Image apply_tilt(const Image& img, const field::TiltMap& tilt) {
  img.validate();
  if (tilt.height != img.height || tilt.width != img.width)
    throw std::invalid_argument("tilt map size does not match image size");
  const int h = img.height, w = img.width;
  Image out = Image::zeros(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sy = std::clamp(y + tilt.dy(y, x), 0.0, static_cast<double>(h - 1));
        double sx = std::clamp(x + tilt.dx(y, x), 0.0, static_cast<double>(w - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int x0 = static_cast<int>(std::floor(sx));
        const int y1 = std::min(y0 + 1, h - 1);
        const int x1 = std::min(x0 + 1, w - 1);
        const double fy = sy - y0;
        const double fx = sx - x0;
        const double top = (1.0 - fx) * img.pixels(c, y0, x0) + fx * img.pixels(c, y0, x1);
        const double bot = (1.0 - fx) * img.pixels(c, y1, x0) + fx * img.pixels(c, y1, x1);
        out.pixels(c, y, x) = std::clamp((1.0 - fy) * top + fy * bot, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma, int ksize) {
  img.validate();
  if (sigma <= 0.0) throw std::invalid_argument("blur sigma must be > 0");
  if (ksize <= 0 || ksize % 2 == 0) throw std::invalid_argument("blur ksize must be odd and positive");

  const int half = ksize / 2;
  std::vector<double> kernel(static_cast<size_t>(ksize));
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    kernel[static_cast<size_t>(i + half)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  const int h = img.height, w = img.width;
  Image tmp = Image::zeros(img.channels, h, w);
  Image out = Image::zeros(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i)
          acc += kernel[static_cast<size_t>(i + half)] * img.pixels(c, y, std::clamp(x + i, 0, w - 1));
        tmp.pixels(c, y, x) = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i)
          acc += kernel[static_cast<size_t>(i + half)] * tmp.pixels(c, std::clamp(y + i, 0, h - 1), x);
        out.pixels(c, y, x) = std::clamp(acc, 0.0, 1.0);
      }
  }
  return out;
}

Image degrade(const Image& img, const field::TiltMap& tilt, const BlurParams& blur,
              DegradeMode mode) {
  switch (mode) {
    case DegradeMode::kTilt: return apply_tilt(img, tilt);
    case DegradeMode::kBlur: return gaussian_blur(img, blur.sigma, blur.ksize);
    case DegradeMode::kTiltBlur:
      return gaussian_blur(apply_tilt(img, tilt), blur.sigma, blur.ksize);
  }
  throw std::logic_error("bad DegradeMode");
}

}  // namespace turb::img
