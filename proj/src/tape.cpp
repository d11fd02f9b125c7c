#include "turbrec/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace turb {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Tape::Node& Tape::node(ValueId id) {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) throw std::invalid_argument("invalid ValueId");
  return nodes_[static_cast<size_t>(id)];
}

const Tape::Node& Tape::node(ValueId id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) throw std::invalid_argument("invalid ValueId");
  return nodes_[static_cast<size_t>(id)];
}

ValueId Tape::push(Tensor value, bool requires_grad,
                   std::function<void(Tape&, const Tensor&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<ValueId>(nodes_.size()) - 1;
}

void Tape::accumulate(ValueId id, const Tensor& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.dims);
  for (size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
}

ValueId Tape::input(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

const Tensor& Tape::value(ValueId id) const { return node(id).value; }

const Tensor& Tape::grad(ValueId id) const {
  if (!backward_done_) throw std::logic_error("grad() requested before backward()");
  const Node& n = node(id);
  if (!n.requires_grad) throw std::logic_error("grad() on a node that does not require grad");
  if (n.grad.data.empty()) {
    // reachable-but-untouched nodes have an all-zero gradient
    const_cast<Node&>(n).grad = Tensor::zeros(n.value.dims);
  }
  return n.grad;
}

void Tape::backward(ValueId loss) {
  require(node(loss).value.size() == 1, "backward target must be scalar");
  run_backward(loss, Tensor::full(node(loss).value.dims, 1.0));
}

void Tape::backward_from(ValueId id, const Tensor& upstream) {
  require(node(id).value.same_dims(upstream), "upstream grad dims mismatch");
  run_backward(id, upstream);
}

void Tape::run_backward(ValueId id, Tensor seed) {
  if (nodes_.empty()) throw std::logic_error("backward() before any forward op");
  for (Node& n : nodes_) n.grad = Tensor();
  node(id).grad = std::move(seed);
  // ids are creation-ordered, so a reverse sweep is a topological order
  for (int i = id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.data.empty() || !n.backprop) continue;
    n.backprop(*this, n.grad);
  }
  backward_done_ = true;
}

// ---- ops --------------------------------------------------------------------

ValueId Tape::conv2d(ValueId x, ValueId w, ValueId b, int stride, int pad) {
  Tensor out = turb::conv2d(value(x), value(w), value(b), stride, pad);
  const bool needs = node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
  auto back = [x, w, b, stride, pad](Tape& t, const Tensor& g) {
    const Tensor& in = t.value(x);
    const Tensor& wt = t.value(w);
    const int c_in = in.dim(0), h = in.dim(1), wi = in.dim(2);
    const int c_out = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
    const int h_out = g.dim(1), w_out = g.dim(2);
    if (t.node(b).requires_grad) {
      Tensor db = Tensor::zeros({c_out});
      for (int co = 0; co < c_out; ++co) {
        double acc = 0.0;
        for (int i = 0; i < h_out * w_out; ++i) acc += g.data[static_cast<size_t>(co) * h_out * w_out + i];
        db(co) = acc;
      }
      t.accumulate(b, db);
    }
    if (t.node(w).requires_grad) {
      Tensor dw = Tensor::zeros(wt.dims);
      for (int co = 0; co < c_out; ++co)
        for (int ci = 0; ci < c_in; ++ci)
          for (int ky = 0; ky < kh; ++ky) {
            const auto [oh_lo, oh_hi] = detail::valid_out_range(h, h_out, stride, pad, ky);
            for (int kx = 0; kx < kw; ++kx) {
              const auto [ow_lo, ow_hi] = detail::valid_out_range(wi, w_out, stride, pad, kx);
              double acc = 0.0;
              for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                const int ih = oh * stride - pad + ky;
                const double* in_row = &in.data[(static_cast<size_t>(ci) * h + ih) * wi - pad + kx];
                const double* g_row = &g.data[(static_cast<size_t>(co) * h_out + oh) * w_out];
                for (int ow = ow_lo; ow <= ow_hi; ++ow) acc += in_row[ow * stride] * g_row[ow];
              }
              dw(co, ci, ky, kx) = acc;
            }
          }
      t.accumulate(w, dw);
    }
    if (t.node(x).requires_grad) {
      Tensor dx = Tensor::zeros(in.dims);
      for (int co = 0; co < c_out; ++co)
        for (int ci = 0; ci < c_in; ++ci)
          for (int ky = 0; ky < kh; ++ky) {
            const auto [oh_lo, oh_hi] = detail::valid_out_range(h, h_out, stride, pad, ky);
            for (int kx = 0; kx < kw; ++kx) {
              const double wv = wt(co, ci, ky, kx);
              if (wv == 0.0) continue;
              const auto [ow_lo, ow_hi] = detail::valid_out_range(wi, w_out, stride, pad, kx);
              for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                const int ih = oh * stride - pad + ky;
                double* dx_row = &dx.data[(static_cast<size_t>(ci) * h + ih) * wi - pad + kx];
                const double* g_row = &g.data[(static_cast<size_t>(co) * h_out + oh) * w_out];
                for (int ow = ow_lo; ow <= ow_hi; ++ow) dx_row[ow * stride] += wv * g_row[ow];
              }
            }
          }
      t.accumulate(x, dx);
    }
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::conv2d_transpose(ValueId x, ValueId w, ValueId b, int stride, int pad) {
  Tensor out = turb::conv2d_transpose(value(x), value(w), value(b), stride, pad);
  const bool needs = node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
  auto back = [x, w, b, stride, pad](Tape& t, const Tensor& g) {
    const Tensor& in = t.value(x);   // [C_out,h,w] in conv2d terms
    const Tensor& wt = t.value(w);   // [C_out,C_in,kh,kw]
    const int c_out = in.dim(0), h = in.dim(1), wi = in.dim(2);
    const int c_in = wt.dim(1), kh = wt.dim(2), kw = wt.dim(3);
    const int g_h = g.dim(1), g_w = g.dim(2);
    if (t.node(b).requires_grad) {
      Tensor db = Tensor::zeros({c_in});
      for (int ci = 0; ci < c_in; ++ci) {
        double acc = 0.0;
        for (int i = 0; i < g_h * g_w; ++i) acc += g.data[static_cast<size_t>(ci) * g_h * g_w + i];
        db(ci) = acc;
      }
      t.accumulate(b, db);
    }
    if (t.node(w).requires_grad) {
      Tensor dw = Tensor::zeros(wt.dims);
      for (int co = 0; co < c_out; ++co)
        for (int ci = 0; ci < c_in; ++ci)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              double acc = 0.0;
              for (int ih = 0; ih < h; ++ih) {
                const int oh = ih * stride - pad + ky;
                if (oh < 0 || oh >= g_h) continue;
                for (int iw = 0; iw < wi; ++iw) {
                  const int ow = iw * stride - pad + kx;
                  if (ow < 0 || ow >= g_w) continue;
                  acc += in(co, ih, iw) * g(ci, oh, ow);
                }
              }
              dw(co, ci, ky, kx) = acc;
            }
      t.accumulate(w, dw);
    }
    if (t.node(x).requires_grad) {
      // the adjoint of a transposed conv is the forward conv applied to g
      Tensor dx = Tensor::zeros(in.dims);
      for (int co = 0; co < c_out; ++co)
        for (int ci = 0; ci < c_in; ++ci)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const double wv = wt(co, ci, ky, kx);
              if (wv == 0.0) continue;
              for (int ih = 0; ih < h; ++ih) {
                const int oh = ih * stride - pad + ky;
                if (oh < 0 || oh >= g_h) continue;
                for (int iw = 0; iw < wi; ++iw) {
                  const int ow = iw * stride - pad + kx;
                  if (ow < 0 || ow >= g_w) continue;
                  dx(co, ih, iw) += wv * g(ci, oh, ow);
                }
              }
            }
      t.accumulate(x, dx);
    }
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::tanh(ValueId x) {
  Tensor out = turb::tanh(value(x));
  const bool needs = node(x).requires_grad;
  ValueId self = push(std::move(out), needs, nullptr);
  if (needs) {
    node(self).backprop = [x, self](Tape& t, const Tensor& g) {
      const Tensor& y = t.value(self);
      Tensor dx = Tensor::zeros(y.dims);
      for (size_t i = 0; i < y.data.size(); ++i) dx.data[i] = g.data[i] * (1.0 - y.data[i] * y.data[i]);
      t.accumulate(x, dx);
    };
  }
  return self;
}

ValueId Tape::relu(ValueId x) {
  Tensor out = turb::relu(value(x));
  const bool needs = node(x).requires_grad;
  auto back = [x](Tape& t, const Tensor& g) {
    const Tensor& in = t.value(x);
    Tensor dx = Tensor::zeros(in.dims);
    for (size_t i = 0; i < in.data.size(); ++i) dx.data[i] = in.data[i] > 0.0 ? g.data[i] : 0.0;
    t.accumulate(x, dx);
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::softmax_rows(ValueId x) {
  Tensor out = turb::softmax_rows(value(x));
  const bool needs = node(x).requires_grad;
  ValueId self = push(std::move(out), needs, nullptr);
  if (needs) {
    node(self).backprop = [x, self](Tape& t, const Tensor& g) {
      const Tensor& a = t.value(self);
      const int n = a.dim(0), m = a.dim(1);
      Tensor dx = Tensor::zeros(a.dims);
      for (int i = 0; i < n; ++i) {
        double inner = 0.0;
        for (int j = 0; j < m; ++j) inner += g(i, j) * a(i, j);
        for (int j = 0; j < m; ++j) dx(i, j) = a(i, j) * (g(i, j) - inner);
      }
      t.accumulate(x, dx);
    };
  }
  return self;
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  Tensor out = turb::matmul(value(a), value(b));
  const bool needs = node(a).requires_grad || node(b).requires_grad;
  auto back = [a, b](Tape& t, const Tensor& g) {
    if (t.node(a).requires_grad) t.accumulate(a, turb::matmul(g, turb::transpose2d(t.value(b))));
    if (t.node(b).requires_grad) t.accumulate(b, turb::matmul(turb::transpose2d(t.value(a)), g));
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::transpose2d(ValueId x) {
  Tensor out = turb::transpose2d(value(x));
  const bool needs = node(x).requires_grad;
  auto back = [x](Tape& t, const Tensor& g) { t.accumulate(x, turb::transpose2d(g)); };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::reshape(ValueId x, std::vector<int> dims) {
  Tensor out = value(x);
  size_t n = 1;
  for (int d : dims) n *= static_cast<size_t>(d);
  require(n == out.data.size(), "reshape size mismatch");
  out.dims = dims;
  const bool needs = node(x).requires_grad;
  auto back = [x](Tape& t, const Tensor& g) {
    Tensor dx = g;
    dx.dims = t.value(x).dims;
    t.accumulate(x, dx);
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::upsample2x_nearest(ValueId x) {
  Tensor out = turb::upsample2x_nearest(value(x));
  const bool needs = node(x).requires_grad;
  auto back = [x](Tape& t, const Tensor& g) {
    const Tensor& in = t.value(x);
    const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
    Tensor dx = Tensor::zeros(in.dims);
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) dx(ci, y / 2, xx / 2) += g(ci, y, xx);
    t.accumulate(x, dx);
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::global_avg_pool(ValueId x) {
  Tensor out = turb::global_avg_pool(value(x));
  const bool needs = node(x).requires_grad;
  auto back = [x](Tape& t, const Tensor& g) {
    const Tensor& in = t.value(x);
    const int c = in.dim(0), n = in.dim(1) * in.dim(2);
    Tensor dx = Tensor::zeros(in.dims);
    for (int ci = 0; ci < c; ++ci)
      for (int i = 0; i < n; ++i) dx.data[static_cast<size_t>(ci) * n + i] = g(ci) / n;
    t.accumulate(x, dx);
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::l2_normalize(ValueId x) {
  const Tensor& in = value(x);
  double norm2 = 0.0;
  for (double v : in.data) norm2 += v * v;
  const double norm = std::sqrt(norm2);
  Tensor out = turb::l2_normalize(in);
  const bool needs = node(x).requires_grad;
  ValueId self = push(std::move(out), needs, nullptr);
  if (needs) {
    node(self).backprop = [x, self, norm](Tape& t, const Tensor& g) {
      const Tensor& y = t.value(self);
      Tensor dx = Tensor::zeros(y.dims);
      if (norm > 0.0) {
        double yg = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) yg += y.data[i] * g.data[i];
        for (size_t i = 0; i < y.data.size(); ++i) dx.data[i] = (g.data[i] - y.data[i] * yg) / norm;
      }
      t.accumulate(x, dx);
    };
  }
  return self;
}

ValueId Tape::standardize_spatial(ValueId x) {
  const Tensor& in = value(x);
  require(in.ndim() == 3, "standardize_spatial expects [C,H,W]");
  const int c = in.dim(0), n = in.dim(1) * in.dim(2);
  // large enough that near-constant channels stay numerically tame under
  // finite-difference probing, small enough not to dent real variances
  constexpr double kEps = 1e-3;
  Tensor out = Tensor::zeros(in.dims);
  std::vector<double> inv_std(static_cast<size_t>(c));
  for (int ci = 0; ci < c; ++ci) {
    const double* src = &in.data[static_cast<size_t>(ci) * n];
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += src[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= n;
    const double r = 1.0 / std::sqrt(var + kEps);
    inv_std[static_cast<size_t>(ci)] = r;
    double* dst = &out.data[static_cast<size_t>(ci) * n];
    for (int i = 0; i < n; ++i) dst[i] = (src[i] - mean) * r;
  }
  const bool needs = node(x).requires_grad;
  ValueId self = push(std::move(out), needs, nullptr);
  if (needs) {
    node(self).backprop = [x, self, c, n, inv_std](Tape& t, const Tensor& g) {
      // dx = r * (g - mean(g) - y * mean(g*y)) per channel
      const Tensor& y = t.value(self);
      Tensor dx = Tensor::zeros(y.dims);
      for (int ci = 0; ci < c; ++ci) {
        const double* yv = &y.data[static_cast<size_t>(ci) * n];
        const double* gv = &g.data[static_cast<size_t>(ci) * n];
        double gm = 0.0, gym = 0.0;
        for (int i = 0; i < n; ++i) {
          gm += gv[i];
          gym += gv[i] * yv[i];
        }
        gm /= n;
        gym /= n;
        const double r = inv_std[static_cast<size_t>(ci)];
        double* dv = &dx.data[static_cast<size_t>(ci) * n];
        for (int i = 0; i < n; ++i) dv[i] = r * (gv[i] - gm - yv[i] * gym);
      }
      t.accumulate(x, dx);
    };
  }
  return self;
}

ValueId Tape::scale(ValueId x, double c) {
  Tensor out = value(x);
  for (double& v : out.data) v *= c;
  const bool needs = node(x).requires_grad;
  auto back = [x, c](Tape& t, const Tensor& g) {
    Tensor dx = g;
    for (double& v : dx.data) v *= c;
    t.accumulate(x, dx);
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::add(ValueId a, ValueId b) {
  require(value(a).same_dims(value(b)), "add dims mismatch");
  Tensor out = value(a);
  const Tensor& bt = value(b);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bt.data[i];
  const bool needs = node(a).requires_grad || node(b).requires_grad;
  auto back = [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  };
  return push(std::move(out), needs, needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::mse_loss(ValueId pred, ValueId target) {
  const double loss = turb::mse_loss(value(pred), value(target));
  const bool needs = node(pred).requires_grad || node(target).requires_grad;
  auto back = [pred, target](Tape& t, const Tensor& g) {
    const Tensor& p = t.value(pred);
    const Tensor& y = t.value(target);
    const double s = 2.0 * g.data[0] / static_cast<double>(p.data.size());
    Tensor d = Tensor::zeros(p.dims);
    for (size_t i = 0; i < p.data.size(); ++i) d.data[i] = s * (p.data[i] - y.data[i]);
    t.accumulate(pred, d);
    if (t.node(target).requires_grad) {
      for (double& v : d.data) v = -v;
      t.accumulate(target, d);
    }
  };
  return push(Tensor({1}, {loss}), needs,
              needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

ValueId Tape::nll_from_logits(ValueId logits, int label) {
  const Tensor& z = value(logits);
  require(z.ndim() == 1, "nll_from_logits expects a vector of logits");
  require(label >= 0 && label < z.dim(0), "label out of range");
  double zmax = z(0);
  for (int i = 1; i < z.dim(0); ++i) zmax = std::max(zmax, z(i));
  double sum = 0.0;
  for (int i = 0; i < z.dim(0); ++i) sum += std::exp(z(i) - zmax);
  const double loss = std::log(sum) + zmax - z(label);
  const bool needs = node(logits).requires_grad;
  auto back = [logits, label, zmax, sum](Tape& t, const Tensor& g) {
    const Tensor& zz = t.value(logits);
    Tensor dz = Tensor::zeros(zz.dims);
    for (int i = 0; i < zz.dim(0); ++i) {
      double p = std::exp(zz(i) - zmax) / sum;
      dz(i) = g.data[0] * (p - (i == label ? 1.0 : 0.0));
    }
    t.accumulate(logits, dz);
  };
  return push(Tensor({1}, {loss}), needs,
              needs ? std::function<void(Tape&, const Tensor&)>(back) : nullptr);
}

}  // namespace turb
