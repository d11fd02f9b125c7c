#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "turbrec/rng.hpp"
#include "turbrec/tape.hpp"
#include "turbrec/tensor.hpp"

namespace testutil {

// Builds a loss on the tape from the given parameter nodes. Must be a pure
// function of the parameter values so finite differences are meaningful.
using LossBuilder = std::function<turb::ValueId(turb::Tape&, const std::vector<turb::ValueId>&)>;

inline double eval_loss(const std::vector<turb::Tensor>& params, const LossBuilder& build) {
  turb::Tape tape;
  std::vector<turb::ValueId> ids;
  ids.reserve(params.size());
  for (const auto& p : params) ids.push_back(tape.input(p, true));
  return tape.value(build(tape, ids)).data[0];
}

// Central-difference check of analytic gradients on up to samples_per_tensor
// entries of each parameter. Returns the worst relative error.
inline double max_fd_rel_error(std::vector<turb::Tensor> params, const LossBuilder& build,
                               int samples_per_tensor, double h, turb::Rng& rng) {
  turb::Tape tape;
  std::vector<turb::ValueId> ids;
  for (const auto& p : params) ids.push_back(tape.input(p, true));
  turb::ValueId loss = build(tape, ids);
  tape.backward(loss);
  std::vector<turb::Tensor> grads;
  for (auto id : ids) grads.push_back(tape.grad(id));

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const int n = params[pi].size();
    std::vector<int> idx;
    if (n <= samples_per_tensor) {
      for (int i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int s = 0; s < samples_per_tensor; ++s)
        idx.push_back(static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n)));
    }
    for (int i : idx) {
      const double orig = params[pi].data[static_cast<size_t>(i)];
      params[pi].data[static_cast<size_t>(i)] = orig + h;
      const double lp = eval_loss(params, build);
      params[pi].data[static_cast<size_t>(i)] = orig - h;
      const double lm = eval_loss(params, build);
      params[pi].data[static_cast<size_t>(i)] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double a = grads[pi].data[static_cast<size_t>(i)];
      const double err = std::abs(a - fd) / std::max({1e-6, std::abs(a), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Fresh directory under the build tree for IO tests.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("turbrec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace testutil
