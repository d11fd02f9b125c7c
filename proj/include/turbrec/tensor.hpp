#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbrec/rng.hpp"

namespace turb {

// Dense row-major tensor of 64-bit floats. The universal numeric carrier for
// feature maps, fields, embeddings and parameters. Doubles throughout:
// finite-difference gradient checks need the headroom and the problem sizes
// are desk scale.
struct Tensor {
  std::vector<int> dims;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> d, std::vector<double> values);

  static Tensor zeros(std::vector<int> dims);
  static Tensor full(std::vector<int> dims, double value);
  // Uniform entries in [-bound, bound], consumed in row-major order.
  static Tensor uniform(std::vector<int> dims, double bound, Rng& rng);

  int size() const { return static_cast<int>(data.size()); }
  int ndim() const { return static_cast<int>(dims.size()); }
  int dim(int i) const { return dims[static_cast<size_t>(i)]; }
  bool same_dims(const Tensor& other) const { return dims == other.dims; }
  bool all_finite() const;

  double& operator()(int i) { return data[static_cast<size_t>(i)]; }
  double operator()(int i) const { return data[static_cast<size_t>(i)]; }
  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * dims[1] + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * dims[1] + j]; }
  double& operator()(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * dims[1] + j) * dims[2] + k];
  }
  double operator()(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * dims[1] + j) * dims[2] + k];
  }
  double& operator()(int i, int j, int k, int l) {
    return data[((static_cast<size_t>(i) * dims[1] + j) * dims[2] + k) * dims[3] + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return data[((static_cast<size_t>(i) * dims[1] + j) * dims[2] + k) * dims[3] + l];
  }
};

// Value/gradient pair; grad always has the same dims as value.
struct GradPair {
  Tensor value;
  Tensor grad;
};

std::string dims_to_string(const std::vector<int>& dims);

namespace detail {
struct ConvRange {
  int lo, hi;  // inclusive; empty if lo > hi
};
ConvRange valid_out_range(int n, int n_out, int stride, int pad, int k);
}  // namespace detail

// ---- primitive forward ops (pure) ------------------------------------------
//
// Convolutions use the cross-correlation convention (no kernel flip); output
// height is (H + 2*pad - kh) / stride + 1 (floor), same for width.

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
              int pad);

// Adjoint of conv2d with the same stride/pad: maps [C_out,H,W] back to
// [C_in,H',W'] with H' = (H-1)*stride - 2*pad + kh. Bias has C_in entries.
Tensor conv2d_transpose(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        int stride, int pad);

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

// Row softmax of a 2-D tensor, stabilized by per-row max subtraction.
Tensor softmax_rows(const Tensor& x);

double mse_loss(const Tensor& pred, const Tensor& target);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& x);
Tensor upsample2x_nearest(const Tensor& x);       // [C,H,W] -> [C,2H,2W]
Tensor global_avg_pool(const Tensor& x);          // [C,H,W] -> [C]
Tensor l2_normalize(const Tensor& x);             // zero vector stays zero

double dot(const Tensor& a, const Tensor& b);

// Classical momentum SGD: v <- momentum*v + g; p <- p - lr*v.
// Velocities must be zero-initialized with the parameter dims.
void sgd_step(std::vector<GradPair>& params, std::vector<Tensor>& velocities, double lr,
              double momentum);

}  // namespace turb
