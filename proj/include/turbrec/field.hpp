#pragma once

#include <cstdint>

#include "turbrec/tensor.hpp"

namespace turb::field {

// Parameters of the power-law random field. Frequencies are measured in
// cycles per image on the FFT grid; the Gaussian envelope exp(-(k/k_c)^2)
// with k_c = max(H,W)/corr_length injects the single length scale L.
// A corr_length much smaller than 1 pixel pushes k_c past Nyquist and
// effectively disables the cutoff.
struct FieldSpec {
  int height = 0;
  int width = 0;
  double alpha = 5.0 / 3.0;  // spectral exponent; 5/3 models Kolmogorov-like flows
  double corr_length = 1e-6;  // pixels
  double strength = 1.0;      // RMS tilt in pixels
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// Zero-mean, unit-variance correlated field.
struct ScalarField {
  int height = 0;
  int width = 0;
  Tensor values;  // [H,W]
};

// Per-pixel displacement in pixels. Serialized as an NPY tensor of dims
// [2,H,W] with channel 0 = dx, channel 1 = dy.
struct TiltMap {
  int height = 0;
  int width = 0;
  Tensor dx;  // [H,W]
  Tensor dy;  // [H,W]

  Tensor packed() const;
  static TiltMap from_packed(const Tensor& t);
};

// Spectral synthesis: complex Gaussian noise per frequency bin, amplitude
// filter k^(-alpha) * exp(-(k/k_c)^2) with the DC bin removed, real part of
// the inverse FFT, then normalization to zero mean and unit variance.
// Deterministic in spec.seed.
ScalarField generate_scalar_field(const FieldSpec& spec);

// Two independent channels from seeds (seed, seed+1), both scaled by
// spec.strength.
TiltMap generate_tilt_map(const FieldSpec& spec);

// Radially averaged periodogram; entry r is the mean power over bins whose
// radial frequency rounds to r.
std::vector<double> radial_power_spectrum(const ScalarField& f);

// Least-squares slope of log radially-averaged power vs log k over
// k in [k_lo, k_hi]. Band must lie inside (0, Nyquist].
double measure_psd_slope(const ScalarField& f, double k_lo, double k_hi);

}  // namespace turb::field
