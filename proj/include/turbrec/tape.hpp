#pragma once

#include <functional>
#include <vector>

#include "turbrec/tensor.hpp"

namespace turb {

using ValueId = int;

// Reverse-mode gradient tape over the fixed set of primitives the pipeline
// uses. Ops execute eagerly; each records a closure that scatters the output
// gradient into its parents. No graph compiler: the networks here have a
// fixed, shallow topology and a fresh tape is built per step.
class Tape {
 public:
  ValueId input(Tensor value, bool requires_grad = false);

  ValueId conv2d(ValueId x, ValueId w, ValueId b, int stride, int pad);
  ValueId conv2d_transpose(ValueId x, ValueId w, ValueId b, int stride, int pad);
  ValueId tanh(ValueId x);
  ValueId relu(ValueId x);
  ValueId softmax_rows(ValueId x);
  ValueId matmul(ValueId a, ValueId b);
  ValueId transpose2d(ValueId x);
  ValueId reshape(ValueId x, std::vector<int> dims);
  ValueId upsample2x_nearest(ValueId x);
  ValueId global_avg_pool(ValueId x);
  ValueId l2_normalize(ValueId x);
  // Per-channel standardization over spatial positions of a [C,H,W] map:
  // y = (x - mean_c) / sqrt(var_c + eps). Scale-invariant conditioning for
  // features feeding the attention head.
  ValueId standardize_spatial(ValueId x);
  ValueId scale(ValueId x, double c);
  ValueId add(ValueId a, ValueId b);
  ValueId mse_loss(ValueId pred, ValueId target);
  // -log softmax(logits)[label], computed log-sum-exp stable. logits: [n].
  ValueId nll_from_logits(ValueId logits, int label);

  const Tensor& value(ValueId id) const;
  // Gradient of the last backward target w.r.t. this node. Hard error if
  // backward has not run.
  const Tensor& grad(ValueId id) const;

  void backward(ValueId loss);                            // loss must be scalar
  void backward_from(ValueId id, const Tensor& upstream);  // arbitrary seed

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Tensor&)> backprop;  // scatters into parents
  };

  Node& node(ValueId id);
  const Node& node(ValueId id) const;
  ValueId push(Tensor value, bool requires_grad, std::function<void(Tape&, const Tensor&)> backprop);
  void accumulate(ValueId id, const Tensor& g);
  void run_backward(ValueId id, Tensor seed);

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  friend struct TapeTestAccess;
};

}  // namespace turb
