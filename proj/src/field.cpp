#include "turbrec/field.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "turbrec/fft.hpp"
#include "turbrec/rng.hpp"

namespace turb::field {

void FieldSpec::validate() const {
  if (height < 4 || width < 4) throw std::invalid_argument("field size must be at least 4x4");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (corr_length <= 0.0) throw std::invalid_argument("corr_length must be > 0");
  if (corr_length > static_cast<double>(std::max(height, width)))
    throw std::invalid_argument("corr_length must not exceed max(H,W)");
  if (strength < 0.0) throw std::invalid_argument("strength must be >= 0");
}

Tensor TiltMap::packed() const {
  Tensor out = Tensor::zeros({2, height, width});
  std::copy(dx.data.begin(), dx.data.end(), out.data.begin());
  std::copy(dy.data.begin(), dy.data.end(), out.data.begin() + dx.data.size());
  return out;
}

TiltMap TiltMap::from_packed(const Tensor& t) {
  if (t.ndim() != 3 || t.dim(0) != 2) throw std::invalid_argument("tilt map tensor must be [2,H,W]");
  TiltMap m;
  m.height = t.dim(1);
  m.width = t.dim(2);
  m.dx = Tensor::zeros({m.height, m.width});
  m.dy = Tensor::zeros({m.height, m.width});
  const size_t plane = m.dx.data.size();
  std::copy(t.data.begin(), t.data.begin() + plane, m.dx.data.begin());
  std::copy(t.data.begin() + plane, t.data.end(), m.dy.data.begin());
  return m;
}

namespace {

// Signed integer frequency of FFT bin i out of n, in cycles per image.
inline int fft_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace

ScalarField generate_scalar_field(const FieldSpec& spec) {
  spec.validate();
  const int h = spec.height, w = spec.width;
  const size_t n = static_cast<size_t>(h) * w;

  // (i) complex Gaussian noise, one (re, im) pair per bin in row-major order
  Rng rng(spec.seed);
  std::vector<std::complex<double>> bins(n);
  for (auto& b : bins) {
    const double re = rng.next_gaussian();
    const double im = rng.next_gaussian();
    b = {re, im};
  }

  // (ii) amplitude filter k^(-alpha) * exp(-(k/k_c)^2), DC removed
  const double k_c = static_cast<double>(std::max(h, w)) / spec.corr_length;
  for (int iy = 0; iy < h; ++iy) {
    const double ky = fft_freq(iy, h);
    for (int ix = 0; ix < w; ++ix) {
      const double kx = fft_freq(ix, w);
      const double k = std::hypot(kx, ky);
      double amp = 0.0;
      if (k > 0.0) {
        const double rel = k / k_c;
        amp = std::pow(k, -spec.alpha) * std::exp(-rel * rel);
      }
      bins[static_cast<size_t>(iy) * w + ix] *= amp;
    }
  }

  // (iii) real part of the inverse transform
  fft::fft2(bins, h, w, /*inverse=*/true);
  Tensor values = Tensor::zeros({h, w});
  for (size_t i = 0; i < n; ++i) values.data[i] = bins[i].real();

  // normalize to zero mean, unit variance
  double mean = 0.0;
  for (double v : values.data) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double& v : values.data) {
    v -= mean;
    var += v * v;
  }
  var /= static_cast<double>(n);
  if (var < 1e-300) throw std::runtime_error("degenerate spectrum: field has no variance");
  const double inv_std = 1.0 / std::sqrt(var);
  for (double& v : values.data) v *= inv_std;

  return ScalarField{h, w, std::move(values)};
}

TiltMap generate_tilt_map(const FieldSpec& spec) {
  spec.validate();
  FieldSpec sx = spec;
  FieldSpec sy = spec;
  sy.seed = spec.seed + 1;  // documented stream split: (seed, seed+1)
  ScalarField fx = generate_scalar_field(sx);
  ScalarField fy = generate_scalar_field(sy);
  TiltMap m;
  m.height = spec.height;
  m.width = spec.width;
  m.dx = std::move(fx.values);
  m.dy = std::move(fy.values);
  for (double& v : m.dx.data) v *= spec.strength;
  for (double& v : m.dy.data) v *= spec.strength;
  return m;
}

std::vector<double> radial_power_spectrum(const ScalarField& f) {
  const int h = f.height, w = f.width;
  std::vector<std::complex<double>> bins(static_cast<size_t>(h) * w);
  for (size_t i = 0; i < bins.size(); ++i) bins[i] = f.values.data[i];
  fft::fft2(bins, h, w, /*inverse=*/false);

  const int r_max = std::min(h, w) / 2;
  std::vector<double> power(static_cast<size_t>(r_max) + 1, 0.0);
  std::vector<int> count(static_cast<size_t>(r_max) + 1, 0);
  for (int iy = 0; iy < h; ++iy) {
    const double ky = fft_freq(iy, h);
    for (int ix = 0; ix < w; ++ix) {
      const double kx = fft_freq(ix, w);
      const int r = static_cast<int>(std::llround(std::hypot(kx, ky)));
      if (r > r_max) continue;
      power[static_cast<size_t>(r)] += std::norm(bins[static_cast<size_t>(iy) * w + ix]);
      count[static_cast<size_t>(r)] += 1;
    }
  }
  for (size_t r = 0; r < power.size(); ++r)
    if (count[r] > 0) power[r] /= count[r];
  return power;
}

double measure_psd_slope(const ScalarField& f, double k_lo, double k_hi) {
  const double nyquist = std::min(f.height, f.width) / 2.0;
  if (!(k_lo >= 1.0 && k_hi <= nyquist && k_lo < k_hi))
    throw std::invalid_argument("psd band must satisfy 1 <= k_lo < k_hi <= Nyquist");
  const std::vector<double> power = radial_power_spectrum(f);

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (size_t r = 1; r < power.size(); ++r) {
    const double k = static_cast<double>(r);
    if (k < k_lo || k > k_hi || power[r] <= 0.0) continue;
    const double lx = std::log(k), ly = std::log(power[r]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) throw std::invalid_argument("psd band contains fewer than two annuli");
  const double denom = m * sxx - sx * sx;
  return (m * sxy - sx * sy) / denom;
}

}  // namespace turb::field
