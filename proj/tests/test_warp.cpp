#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "helpers.hpp"
#include "turbrec/fft.hpp"
#include "turbrec/image.hpp"
#include "turbrec/warp.hpp"

using turb::Tensor;
using turb::field::FieldSpec;
using turb::field::TiltMap;
using turb::img::BlurParams;
using turb::img::DegradeMode;
using turb::img::Image;

namespace {

TiltMap constant_tilt(int h, int w, double dx, double dy) {
  TiltMap t;
  t.height = h;
  t.width = w;
  t.dx = Tensor::full({h, w}, dx);
  t.dy = Tensor::full({h, w}, dy);
  return t;
}

Image ramp_image(int h, int w) {
  Image im = Image::zeros(1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) im.pixels(0, y, x) = static_cast<double>(x) / (w - 1);
  return im;
}

Image random_image(int h, int w, std::uint64_t seed) {
  turb::Rng rng(seed);
  Image im = Image::zeros(1, h, w);
  for (double& v : im.pixels.data) v = rng.next_double();
  return im;
}

// textured but not pure-noise test image, built from a correlated field
Image natural_image(int h, int w, std::uint64_t seed) {
  FieldSpec s;
  s.height = h;
  s.width = w;
  s.alpha = 1.0;
  s.corr_length = 1e-6;
  s.seed = seed;
  auto f = turb::field::generate_scalar_field(s);
  double lo = f.values.data[0], hi = f.values.data[0];
  for (double v : f.values.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double& v : f.values.data) v = (v - lo) / (hi - lo);
  return Image::from_tensor(f.values);
}

double total_variation(const Image& im) {
  double tv = 0.0;
  for (int c = 0; c < im.channels; ++c)
    for (int y = 0; y + 1 < im.height; ++y)
      for (int x = 0; x + 1 < im.width; ++x) {
        tv += std::abs(im.pixels(c, y, x + 1) - im.pixels(c, y, x));
        tv += std::abs(im.pixels(c, y + 1, x) - im.pixels(c, y, x));
      }
  return tv;
}

// spectral power above half the Nyquist radius
double high_freq_energy(const Image& im) {
  const int h = im.height, w = im.width;
  std::vector<std::complex<double>> bins(static_cast<size_t>(h) * w);
  for (size_t i = 0; i < bins.size(); ++i) bins[i] = im.pixels.data[i];
  turb::fft::fft2(bins, h, w, false);
  const double cutoff = std::min(h, w) / 4.0;
  double acc = 0.0;
  for (int y = 0; y < h; ++y) {
    const double ky = y <= h / 2 ? y : y - h;
    for (int x = 0; x < w; ++x) {
      const double kx = x <= w / 2 ? x : x - w;
      if (std::hypot(kx, ky) > cutoff) acc += std::norm(bins[static_cast<size_t>(y) * w + x]);
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("zero tilt map is a bit-exact identity") {
  Image im = random_image(9, 7, 21);
  Image out = turb::img::apply_tilt(im, constant_tilt(9, 7, 0.0, 0.0));
  CHECK(out.pixels.data == im.pixels.data);
}

TEST_CASE("constant integer tilt matches the hand-shifted oracle on interior pixels") {
  Image im = random_image(8, 10, 22);
  Image out = turb::img::apply_tilt(im, constant_tilt(8, 10, 1.0, 0.0));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x + 1 < 10; ++x) CHECK(out.pixels(0, y, x) == im.pixels(0, y, x + 1));

  Image down = turb::img::apply_tilt(im, constant_tilt(8, 10, 0.0, -2.0));
  for (int y = 2; y < 8; ++y)
    for (int x = 0; x < 10; ++x) CHECK(down.pixels(0, y, x) == im.pixels(0, y - 2, x));
}

TEST_CASE("half-pixel tilt on a linear ramp matches the closed form") {
  Image im = ramp_image(6, 11);
  Image out = turb::img::apply_tilt(im, constant_tilt(6, 11, 0.5, 0.0));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x + 1 < 11; ++x) {
      const double expected = (static_cast<double>(x) + 0.5) / 10.0;
      CHECK(out.pixels(0, y, x) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("tilt size mismatch is a hard error") {
  Image im = random_image(8, 8, 23);
  CHECK_THROWS_AS(turb::img::apply_tilt(im, constant_tilt(8, 9, 0.0, 0.0)), std::invalid_argument);
}

TEST_CASE("warped output stays in range under extreme displacement") {
  Image im = random_image(16, 16, 24);
  FieldSpec s;
  s.height = 16;
  s.width = 16;
  s.corr_length = 4.0;
  s.strength = 30.0;  // way past the border
  s.seed = 5;
  Image out = turb::img::apply_tilt(im, turb::field::generate_tilt_map(s));
  for (double v : out.pixels.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("changing the tilt only inside a region leaves the outside untouched") {
  Image im = random_image(16, 16, 25);
  TiltMap a = constant_tilt(16, 16, 0.7, -0.3);
  TiltMap b = a;
  for (int y = 4; y < 8; ++y)
    for (int x = 5; x < 9; ++x) {
      b.dx(y, x) = -2.0;
      b.dy(y, x) = 1.5;
    }
  Image outa = turb::img::apply_tilt(im, a);
  Image outb = turb::img::apply_tilt(im, b);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const bool inside = y >= 4 && y < 8 && x >= 5 && x < 9;
      if (!inside) CHECK(outa.pixels(0, y, x) == outb.pixels(0, y, x));
    }
}

TEST_CASE("gaussian blur keeps constant images constant") {
  Image im = Image::zeros(1, 7, 7);
  for (double& v : im.pixels.data) v = 0.42;
  Image out = turb::img::gaussian_blur(im, 1.0, 5);
  for (double v : out.pixels.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("gaussian blur of a delta matches the dense 2-D kernel oracle") {
  const int n = 11, c = 5;
  const double sigma = 1.2;
  const int ksize = 5, half = 2;
  Image im = Image::zeros(1, n, n);
  im.pixels(0, c, c) = 1.0;
  Image out = turb::img::gaussian_blur(im, sigma, ksize);

  // dense 2-D kernel, normalized as a whole
  double k2[5][5], sum = 0.0;
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j) {
      k2[i + half][j + half] = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      sum += k2[i + half][j + half];
    }
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int dy = y - c, dx = x - c;
      const double expected =
          (std::abs(dy) <= half && std::abs(dx) <= half) ? k2[dy + half][dx + half] / sum : 0.0;
      CHECK(out.pixels(0, y, x) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("blur never increases total variation") {
  for (int i = 0; i < 20; ++i) {
    Image im = random_image(12, 12, 300 + i);
    Image out = turb::img::gaussian_blur(im, 1.0, 5);
    CHECK(total_variation(out) <= total_variation(im));
  }
}

TEST_CASE("blur parameter validation") {
  Image im = random_image(6, 6, 26);
  CHECK_THROWS_AS(turb::img::gaussian_blur(im, 0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(turb::img::gaussian_blur(im, 1.0, 4), std::invalid_argument);
}

TEST_CASE("degrade composes tilt and blur in order") {
  Image im = random_image(12, 12, 27);
  FieldSpec s;
  s.height = 12;
  s.width = 12;
  s.corr_length = 4.0;
  s.strength = 1.5;
  s.seed = 9;
  TiltMap tilt = turb::field::generate_tilt_map(s);
  BlurParams blur{1.0, 5};

  Image t = turb::img::degrade(im, tilt, blur, DegradeMode::kTilt);
  CHECK(t.pixels.data == turb::img::apply_tilt(im, tilt).pixels.data);

  Image b = turb::img::degrade(im, tilt, blur, DegradeMode::kBlur);
  CHECK(b.pixels.data == turb::img::gaussian_blur(im, 1.0, 5).pixels.data);

  Image tb = turb::img::degrade(im, tilt, blur, DegradeMode::kTiltBlur);
  Image oracle = turb::img::gaussian_blur(turb::img::apply_tilt(im, tilt), 1.0, 5);
  CHECK(tb.pixels.data == oracle.pixels.data);
}

TEST_CASE("mode names round trip") {
  using turb::img::degrade_mode_name;
  using turb::img::parse_degrade_mode;
  for (auto name : {"tilt", "blur", "tilt+blur"}) CHECK(degrade_mode_name(parse_degrade_mode(name)) == name);
  CHECK_THROWS_AS(parse_degrade_mode("sharpen"), std::invalid_argument);
}

TEST_CASE("warping removes high-frequency energy on average") {
  double in_acc = 0.0, out_acc = 0.0;
  for (int i = 0; i < 20; ++i) {
    Image im = natural_image(64, 64, 400 + i);
    FieldSpec s;
    s.height = 64;
    s.width = 64;
    s.corr_length = 8.0;
    s.strength = 1.5;
    s.seed = 800 + i;
    Image out = turb::img::apply_tilt(im, turb::field::generate_tilt_map(s));
    in_acc += high_freq_energy(im);
    out_acc += high_freq_energy(out);
  }
  CHECK(out_acc <= in_acc);
}

TEST_CASE("pgm and ppm round trip exactly at 8-bit resolution") {
  auto dir = testutil::temp_dir("pnm");

  Image gray = random_image(9, 13, 28);
  // snap to the 8-bit lattice so the round trip is exact
  for (double& v : gray.pixels.data) v = std::round(v * 255.0) / 255.0;
  turb::img::save_image(dir / "g.pgm", gray);
  Image gray2 = turb::img::load_image(dir / "g.pgm");
  CHECK(gray2.channels == 1);
  CHECK(gray2.pixels.data == gray.pixels.data);

  Image rgb = Image::zeros(3, 5, 4);
  turb::Rng rng(29);
  for (double& v : rgb.pixels.data) v = std::round(rng.next_double() * 255.0) / 255.0;
  turb::img::save_image(dir / "c.ppm", rgb);
  Image rgb2 = turb::img::load_image(dir / "c.ppm");
  CHECK(rgb2.channels == 3);
  CHECK(rgb2.pixels.data == rgb.pixels.data);

  turb::img::save_image(dir / "g.npy", gray);
  Image gray3 = turb::img::load_image(dir / "g.npy");
  CHECK(gray3.pixels.data == gray.pixels.data);

  CHECK_THROWS_AS(turb::img::save_image(dir / "g.ppm", gray), std::invalid_argument);
  CHECK_THROWS_AS(turb::img::load_image(dir / "missing.pgm"), std::runtime_error);
}

TEST_CASE("grayscale conversion averages channels") {
  Image rgb = Image::zeros(3, 2, 2);
  rgb.pixels(0, 0, 0) = 0.3;
  rgb.pixels(1, 0, 0) = 0.6;
  rgb.pixels(2, 0, 0) = 0.9;
  Image g = turb::img::to_grayscale(rgb);
  CHECK(g.channels == 1);
  CHECK(g.pixels(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-15));
}
