#include "turbrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace turb {

namespace {

size_t checked_size(const std::vector<int>& dims) {
  if (dims.empty()) throw std::invalid_argument("tensor needs at least one dim");
  size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + dims_to_string(dims));
    n *= static_cast<size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> d, std::vector<double> values) : dims(std::move(d)), data(std::move(values)) {
  if (checked_size(dims) != data.size())
    throw std::invalid_argument("tensor data length does not match dims " + dims_to_string(dims));
}

Tensor Tensor::zeros(std::vector<int> dims) {
  size_t n = checked_size(dims);
  return Tensor(std::move(dims), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> dims, double value) {
  size_t n = checked_size(dims);
  return Tensor(std::move(dims), std::vector<double>(n, value));
}

Tensor Tensor::uniform(std::vector<int> dims, double bound, Rng& rng) {
  size_t n = checked_size(dims);
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_uniform(-bound, bound);
  return Tensor(std::move(dims), std::move(v));
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string dims_to_string(const std::vector<int>& dims) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << "]";
  return os.str();
}

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_conv_args(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
                     int pad, int bias_channels) {
  require(input.ndim() == 3, "conv input must be [C,H,W], got " + dims_to_string(input.dims));
  require(weights.ndim() == 4, "conv weights must be [C_out,C_in,kh,kw], got " + dims_to_string(weights.dims));
  require(bias.ndim() == 1 && bias.dim(0) == bias_channels,
          "conv bias must have " + std::to_string(bias_channels) + " entries");
  require(weights.dim(2) % 2 == 1 && weights.dim(3) % 2 == 1, "kernel sides must be odd");
  require(stride >= 1, "stride must be >= 1");
  require(pad >= 0, "pad must be >= 0");
}

}  // namespace

namespace detail {

// Range of output indices o for which o*stride - pad + k lands in [0, n).
// Keeps the hot conv loops free of per-element bounds checks.
ConvRange valid_out_range(int n, int n_out, int stride, int pad, int k) {
  const int num_lo = pad - k;  // o*stride >= num_lo
  int lo = num_lo <= 0 ? 0 : (num_lo + stride - 1) / stride;
  const int num_hi = n - 1 - k + pad;  // o*stride <= num_hi
  int hi = num_hi < 0 ? -1 : num_hi / stride;
  hi = std::min(hi, n_out - 1);
  return {lo, hi};
}

}  // namespace detail

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride, int pad) {
  check_conv_args(input, weights, bias, stride, pad, weights.dim(0));
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  require(weights.dim(1) == c_in, "conv channel mismatch: input has " + std::to_string(c_in) +
                                      ", weights expect " + std::to_string(weights.dim(1)));
  const int h_out = (h + 2 * pad - kh) / stride + 1;
  const int w_out = (w + 2 * pad - kw) / stride + 1;
  require(h + 2 * pad >= kh && w + 2 * pad >= kw, "kernel larger than padded input");

  Tensor out = Tensor::zeros({c_out, h_out, w_out});
  for (int co = 0; co < c_out; ++co) {
    for (int oh = 0; oh < h_out; ++oh) {
      for (int ow = 0; ow < w_out; ++ow) out(co, oh, ow) = bias(co);
    }
    for (int ci = 0; ci < c_in; ++ci) {
      for (int ky = 0; ky < kh; ++ky) {
        const auto [oh_lo, oh_hi] = detail::valid_out_range(h, h_out, stride, pad, ky);
        for (int kx = 0; kx < kw; ++kx) {
          const double wv = weights(co, ci, ky, kx);
          if (wv == 0.0) continue;
          const auto [ow_lo, ow_hi] = detail::valid_out_range(w, w_out, stride, pad, kx);
          for (int oh = oh_lo; oh <= oh_hi; ++oh) {
            const int ih = oh * stride - pad + ky;
            const double* in_row = &input.data[(static_cast<size_t>(ci) * h + ih) * w - pad + kx];
            double* out_row = &out.data[(static_cast<size_t>(co) * h_out + oh) * w_out];
            for (int ow = ow_lo; ow <= ow_hi; ++ow) out_row[ow] += wv * in_row[ow * stride];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
                        int pad) {
  check_conv_args(input, weights, bias, stride, pad, weights.dim(1));
  const int c_out = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int kh = weights.dim(2), kw = weights.dim(3);
  require(weights.dim(0) == c_out, "conv_transpose channel mismatch: input has " +
                                       std::to_string(c_out) + ", weights expect " +
                                       std::to_string(weights.dim(0)));
  const int c_in = weights.dim(1);
  const int h_out = (h - 1) * stride - 2 * pad + kh;
  const int w_out = (w - 1) * stride - 2 * pad + kw;
  require(h_out > 0 && w_out > 0, "conv_transpose output would be empty");

  Tensor out = Tensor::zeros({c_in, h_out, w_out});
  for (int ci = 0; ci < c_in; ++ci)
    for (int i = 0; i < h_out * w_out; ++i) out.data[static_cast<size_t>(ci) * h_out * w_out + i] = bias(ci);

  for (int co = 0; co < c_out; ++co) {
    for (int ci = 0; ci < c_in; ++ci) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double wv = weights(co, ci, ky, kx);
          if (wv == 0.0) continue;
          for (int ih = 0; ih < h; ++ih) {
            const int oh = ih * stride - pad + ky;
            if (oh < 0 || oh >= h_out) continue;
            for (int iw = 0; iw < w; ++iw) {
              const int ow = iw * stride - pad + kx;
              if (ow < 0 || ow >= w_out) continue;
              out(ci, oh, ow) += wv * input(co, ih, iw);
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = std::tanh(v);
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require(x.ndim() == 2, "softmax_rows expects a 2-D tensor, got " + dims_to_string(x.dims));
  const int n = x.dim(0), m = x.dim(1);
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < n; ++i) {
    double row_max = x(i, 0);
    for (int j = 1; j < m; ++j) row_max = std::max(row_max, x(i, j));
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      const double e = std::exp(x(i, j) - row_max);
      out(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < m; ++j) out(i, j) /= sum;
  }
  return out;
}

double mse_loss(const Tensor& pred, const Tensor& target) {
  require(pred.same_dims(target), "mse_loss dims mismatch: " + dims_to_string(pred.dims) + " vs " +
                                      dims_to_string(target.dims));
  double acc = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.data.size());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2, "matmul expects 2-D tensors");
  require(a.dim(1) == b.dim(0), "matmul inner dims mismatch: " + dims_to_string(a.dims) + " * " +
                                    dims_to_string(b.dims));
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(p) * m];
      double* orow = &out.data[static_cast<size_t>(i) * m];
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose2d(const Tensor& x) {
  require(x.ndim() == 2, "transpose2d expects a 2-D tensor");
  const int n = x.dim(0), m = x.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out(j, i) = x(i, j);
  return out;
}

Tensor upsample2x_nearest(const Tensor& x) {
  require(x.ndim() == 3, "upsample2x expects [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out = Tensor::zeros({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx) out(ci, y, xx) = x(ci, y / 2, xx / 2);
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  require(x.ndim() == 3, "global_avg_pool expects [C,H,W]");
  const int c = x.dim(0), n = x.dim(1) * x.dim(2);
  Tensor out = Tensor::zeros({c});
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += x.data[static_cast<size_t>(ci) * n + i];
    out(ci) = acc / n;
  }
  return out;
}

Tensor l2_normalize(const Tensor& x) {
  double norm2 = 0.0;
  for (double v : x.data) norm2 += v * v;
  if (norm2 == 0.0) return x;  // documented degenerate case
  const double inv = 1.0 / std::sqrt(norm2);
  Tensor out = x;
  for (double& v : out.data) v *= inv;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), "dot length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

void sgd_step(std::vector<GradPair>& params, std::vector<Tensor>& velocities, double lr,
              double momentum) {
  require(lr > 0.0, "sgd lr must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "sgd momentum must be in [0,1)");
  require(params.size() == velocities.size(), "sgd params/velocities size mismatch");
  for (size_t p = 0; p < params.size(); ++p) {
    GradPair& gp = params[p];
    Tensor& vel = velocities[p];
    require(gp.value.same_dims(gp.grad), "GradPair dims mismatch");
    require(vel.same_dims(gp.value), "velocity dims mismatch");
    for (size_t i = 0; i < gp.value.data.size(); ++i) {
      vel.data[i] = momentum * vel.data[i] + gp.grad.data[i];
      gp.value.data[i] -= lr * vel.data[i];
    }
  }
}

}  // namespace turb
