#include "turbrec/tiltnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "turbrec/warp.hpp"

namespace turb::tiltnet {

TiltNetParams TiltNetParams::init(const TiltNetConfig& config, std::uint64_t seed) {
  if (config.encoder_channels.size() != 3 || config.decoder_channels.size() != 3)
    throw std::invalid_argument("tilt net uses 3 encoder and 3 decoder blocks");
  if (config.decoder_channels.back() != 2)
    throw std::invalid_argument("tilt net final layer must emit 2 channels");
  Rng rng(seed);
  TiltNetParams p;
  p.config = config;
  int c_in = 1;
  for (int c_out : config.encoder_channels) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(c_in) * 9.0));  // He-uniform
    p.enc_w.push_back(Tensor::uniform({c_out, c_in, 3, 3}, bound, rng));
    p.enc_b.push_back(Tensor::zeros({c_out}));
    c_in = c_out;
  }
  for (int c_out : config.decoder_channels) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(c_in) * 9.0));  // He-uniform
    p.dec_w.push_back(Tensor::uniform({c_out, c_in, 3, 3}, bound, rng));
    p.dec_b.push_back(Tensor::zeros({c_out}));
    c_in = c_out;
  }
  return p;
}

void TiltNetParams::validate() const {
  if (enc_w.size() != 3 || dec_w.size() != 3 || enc_b.size() != 3 || dec_b.size() != 3)
    throw std::invalid_argument("tilt net parameter lists must have 3 blocks each");
  if (dec_w.back().dim(0) != 2) throw std::invalid_argument("tilt net final layer must emit 2 channels");
}

TiltNetParamIds insert_params(Tape& tape, const TiltNetParams& p, bool requires_grad) {
  p.validate();
  TiltNetParamIds ids;
  for (size_t i = 0; i < p.enc_w.size(); ++i) {
    ids.enc_w.push_back(tape.input(p.enc_w[i], requires_grad));
    ids.enc_b.push_back(tape.input(p.enc_b[i], requires_grad));
  }
  for (size_t i = 0; i < p.dec_w.size(); ++i) {
    ids.dec_w.push_back(tape.input(p.dec_w[i], requires_grad));
    ids.dec_b.push_back(tape.input(p.dec_b[i], requires_grad));
  }
  return ids;
}

ValueId forward_on_tape(Tape& tape, ValueId gray, const TiltNetParamIds& ids) {
  const Tensor& x = tape.value(gray);
  if (x.ndim() != 3 || x.dim(0) != 1) throw std::invalid_argument("tilt net input must be [1,H,W]");
  if (x.dim(1) % 8 != 0 || x.dim(2) % 8 != 0)
    throw std::invalid_argument("tilt net input dims must be divisible by 8; pad upstream");

  // per-channel standardization after every hidden block stands in for the
  // batch norm a full-scale residual encoder would carry
  ValueId h = gray;
  for (size_t i = 0; i < ids.enc_w.size(); ++i)
    h = tape.standardize_spatial(tape.relu(tape.conv2d(h, ids.enc_w[i], ids.enc_b[i], 2, 1)));
  for (size_t i = 0; i < ids.dec_w.size(); ++i) {
    h = tape.conv2d(tape.upsample2x_nearest(h), ids.dec_w[i], ids.dec_b[i], 1, 1);
    if (i + 1 < ids.dec_w.size()) h = tape.standardize_spatial(tape.relu(h));  // linear output
  }
  return h;
}

field::TiltMap predict_tilt(const TiltNetParams& params, const img::Image& image) {
  img::Image gray = img::to_grayscale(image);
  Tape tape;
  ValueId out = forward_on_tape(tape, tape.input(gray.pixels, false), insert_params(tape, params, false));
  return field::TiltMap::from_packed(tape.value(out));
}

std::vector<TiltTrainSample> synth_training_set(const std::vector<img::Image>& pristine,
                                                int n_per_image, const SpecRanges& ranges,
                                                std::uint64_t seed) {
  if (pristine.empty()) throw std::invalid_argument("pristine image set is empty");
  if (n_per_image < 0) throw std::invalid_argument("n_per_image must be >= 0");
  if (!(ranges.corr_length_min > 0.0 && ranges.corr_length_min <= ranges.corr_length_max))
    throw std::invalid_argument("bad corr_length range");
  if (!(ranges.strength_min >= 0.0 && ranges.strength_min <= ranges.strength_max))
    throw std::invalid_argument("bad strength range");

  Rng rng(seed);
  std::vector<TiltTrainSample> out;
  out.reserve(pristine.size() * static_cast<size_t>(n_per_image));
  for (const img::Image& image : pristine) {
    for (int j = 0; j < n_per_image; ++j) {
      field::FieldSpec spec;
      spec.height = image.height;
      spec.width = image.width;
      spec.alpha = ranges.alpha;
      spec.corr_length = rng.next_uniform(ranges.corr_length_min, ranges.corr_length_max);
      spec.strength = rng.next_uniform(ranges.strength_min, ranges.strength_max);
      spec.seed = rng.next_u64();
      field::TiltMap tilt = field::generate_tilt_map(spec);
      img::Image degraded = img::to_grayscale(img::apply_tilt(image, tilt));
      out.push_back({std::move(degraded), std::move(tilt)});
    }
  }
  return out;
}

TiltTrainResult train_tilt_predictor(const std::vector<TiltTrainSample>& samples,
                                     const TiltTrainConfig& config) {
  if (samples.empty()) throw std::invalid_argument("empty tilt training set");
  if (config.batch_size < 1 || config.epochs < 0) throw std::invalid_argument("bad batch size or epochs");

  TiltTrainResult result;
  result.params = TiltNetParams::init(config.net, Rng::derive(config.seed, "tiltnet"));
  TiltNetParams& net = result.params;

  std::vector<Tensor*> params;
  for (auto& t : net.enc_w) params.push_back(&t);
  for (auto& t : net.enc_b) params.push_back(&t);
  for (auto& t : net.dec_w) params.push_back(&t);
  for (auto& t : net.dec_b) params.push_back(&t);
  std::vector<Tensor> velocities;
  for (Tensor* t : params) velocities.push_back(Tensor::zeros(t->dims));

  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle_rng(Rng::derive(config.seed, "order"));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      Tape tape;
      TiltNetParamIds ids;
      for (size_t i = 0; i < net.enc_w.size(); ++i) {
        ids.enc_w.push_back(tape.input(net.enc_w[i], true));
        ids.enc_b.push_back(tape.input(net.enc_b[i], true));
      }
      for (size_t i = 0; i < net.dec_w.size(); ++i) {
        ids.dec_w.push_back(tape.input(net.dec_w[i], true));
        ids.dec_b.push_back(tape.input(net.dec_b[i], true));
      }
      std::vector<ValueId> param_ids;
      for (ValueId id : ids.enc_w) param_ids.push_back(id);
      for (ValueId id : ids.enc_b) param_ids.push_back(id);
      for (ValueId id : ids.dec_w) param_ids.push_back(id);
      for (ValueId id : ids.dec_b) param_ids.push_back(id);

      ValueId batch_loss = -1;
      for (size_t i = start; i < end; ++i) {
        const TiltTrainSample& s = samples[static_cast<size_t>(order[i])];
        ValueId pred = forward_on_tape(tape, tape.input(s.degraded.pixels, false), ids);
        ValueId loss = tape.mse_loss(pred, tape.input(s.target.packed(), false));
        batch_loss = batch_loss < 0 ? loss : tape.add(batch_loss, loss);
      }
      batch_loss = tape.scale(batch_loss, 1.0 / static_cast<double>(end - start));
      tape.backward(batch_loss);
      epoch_loss += tape.value(batch_loss).data[0];
      ++batches;

      std::vector<GradPair> pairs;
      for (size_t p = 0; p < params.size(); ++p) pairs.push_back({*params[p], tape.grad(param_ids[p])});
      sgd_step(pairs, velocities, config.lr, config.sgd_momentum);
      for (size_t p = 0; p < params.size(); ++p) *params[p] = std::move(pairs[p].value);
    }
    result.epoch_loss.push_back(epoch_loss / std::max(1, batches));
  }
  return result;
}

}  // namespace turb::tiltnet
