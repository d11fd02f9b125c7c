#pragma once

#include <cstdint>

#include "turbrec/tape.hpp"
#include "turbrec/tensor.hpp"

namespace turb::attn {

struct AttentionConfig {
  int c_in = 32;   // full-scale setting is 1024
  int c_out = 16;  // full-scale setting is 512
};

// Query/key/value 1x1 transforms of the self-attention projection head.
// Three independent parameter sets; c_out < c_in so the head compresses.
struct AttentionParams {
  AttentionConfig config;
  Tensor w_q, b_q;  // [C_out,C_in,1,1], [C_out]
  Tensor w_k, b_k;
  Tensor w_v, b_v;

  // Weights uniform in +/- sqrt(1/C_in), biases zero.
  static AttentionParams init(AttentionConfig config, std::uint64_t seed);
  void validate() const;
  long long parameter_count() const;
};

// Q = tanh(conv1x1(f; w_q)), K and V alike; with [C_out,N] reshapes
// (N = H*W, row-major), S = Q^T K, A = softmax_rows(S), output = V A^T
// reshaped back to [C_out,H,W].
Tensor attention_forward(const Tensor& f, const AttentionParams& p);

struct AttentionGrads {
  Tensor f;
  Tensor w_q, b_q, w_k, b_k, w_v, b_v;
};

// Analytic gradients of <upstream, attention_forward(f)> w.r.t. the input
// feature map and every parameter.
AttentionGrads attention_backward(const Tensor& f, const AttentionParams& p,
                                  const Tensor& upstream);

// Global average pool over spatial positions followed by L2 normalization;
// the all-zero map stays zero.
Tensor pool_embed(const Tensor& f);

// Tape plumbing for trainers that backprop through the head.
struct AttentionParamIds {
  ValueId w_q, b_q, w_k, b_k, w_v, b_v;
};
AttentionParamIds insert_params(Tape& tape, const AttentionParams& p, bool requires_grad);
ValueId forward_on_tape(Tape& tape, ValueId f, const AttentionParamIds& ids);
ValueId pool_embed_on_tape(Tape& tape, ValueId f);

}  // namespace turb::attn
