#include "turbrec/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace turb::attn {

AttentionParams AttentionParams::init(AttentionConfig config, std::uint64_t seed) {
  if (config.c_in < 2 || config.c_out < 1 || config.c_out >= config.c_in)
    throw std::invalid_argument("attention head requires 1 <= c_out < c_in");
  Rng rng(seed);
  const double bound = std::sqrt(1.0 / config.c_in);
  AttentionParams p;
  p.config = config;
  p.w_q = Tensor::uniform({config.c_out, config.c_in, 1, 1}, bound, rng);
  p.w_k = Tensor::uniform({config.c_out, config.c_in, 1, 1}, bound, rng);
  p.w_v = Tensor::uniform({config.c_out, config.c_in, 1, 1}, bound, rng);
  p.b_q = Tensor::zeros({config.c_out});
  p.b_k = Tensor::zeros({config.c_out});
  p.b_v = Tensor::zeros({config.c_out});
  return p;
}

void AttentionParams::validate() const {
  const std::vector<int> wdims{config.c_out, config.c_in, 1, 1};
  if (w_q.dims != wdims || w_k.dims != wdims || w_v.dims != wdims)
    throw std::invalid_argument("attention weights must be [C_out,C_in,1,1]");
  const std::vector<int> bdims{config.c_out};
  if (b_q.dims != bdims || b_k.dims != bdims || b_v.dims != bdims)
    throw std::invalid_argument("attention biases must be [C_out]");
  if (config.c_out >= config.c_in) throw std::invalid_argument("attention head must compress: c_out < c_in");
}

long long AttentionParams::parameter_count() const {
  return 3LL * (static_cast<long long>(config.c_in) * config.c_out + config.c_out);
}

AttentionParamIds insert_params(Tape& tape, const AttentionParams& p, bool requires_grad) {
  p.validate();
  AttentionParamIds ids;
  ids.w_q = tape.input(p.w_q, requires_grad);
  ids.b_q = tape.input(p.b_q, requires_grad);
  ids.w_k = tape.input(p.w_k, requires_grad);
  ids.b_k = tape.input(p.b_k, requires_grad);
  ids.w_v = tape.input(p.w_v, requires_grad);
  ids.b_v = tape.input(p.b_v, requires_grad);
  return ids;
}

ValueId forward_on_tape(Tape& tape, ValueId f, const AttentionParamIds& ids) {
  // copy the dims up front: node pushes may reallocate the tape's storage
  if (tape.value(f).ndim() != 3) throw std::invalid_argument("attention input must be [C,H,W]");
  const int c = tape.value(f).dim(0), h = tape.value(f).dim(1), w = tape.value(f).dim(2);
  const int c_in = tape.value(ids.w_q).dim(1), c_out = tape.value(ids.w_q).dim(0);
  if (c != c_in)
    throw std::invalid_argument("attention channel mismatch: input has " + std::to_string(c) +
                                " channels, head expects " + std::to_string(c_in));
  const int n = h * w;

  ValueId q = tape.reshape(tape.tanh(tape.conv2d(f, ids.w_q, ids.b_q, 1, 0)), {c_out, n});
  ValueId k = tape.reshape(tape.tanh(tape.conv2d(f, ids.w_k, ids.b_k, 1, 0)), {c_out, n});
  ValueId v = tape.reshape(tape.tanh(tape.conv2d(f, ids.w_v, ids.b_v, 1, 0)), {c_out, n});

  ValueId scores = tape.matmul(tape.transpose2d(q), k);   // [N,N]
  ValueId attention = tape.softmax_rows(scores);
  ValueId out = tape.matmul(v, tape.transpose2d(attention));
  return tape.reshape(out, {c_out, h, w});
}

ValueId pool_embed_on_tape(Tape& tape, ValueId f) {
  return tape.l2_normalize(tape.global_avg_pool(f));
}

Tensor attention_forward(const Tensor& f, const AttentionParams& p) {
  Tape tape;
  ValueId fi = tape.input(f, false);
  return tape.value(forward_on_tape(tape, fi, insert_params(tape, p, false)));
}

AttentionGrads attention_backward(const Tensor& f, const AttentionParams& p,
                                  const Tensor& upstream) {
  Tape tape;
  ValueId fi = tape.input(f, true);
  AttentionParamIds ids = insert_params(tape, p, true);
  ValueId out = forward_on_tape(tape, fi, ids);
  tape.backward_from(out, upstream);
  AttentionGrads g;
  g.f = tape.grad(fi);
  g.w_q = tape.grad(ids.w_q);
  g.b_q = tape.grad(ids.b_q);
  g.w_k = tape.grad(ids.w_k);
  g.b_k = tape.grad(ids.b_k);
  g.w_v = tape.grad(ids.w_v);
  g.b_v = tape.grad(ids.b_v);
  return g;
}

Tensor pool_embed(const Tensor& f) { return l2_normalize(global_avg_pool(f)); }

}  // namespace turb::attn
