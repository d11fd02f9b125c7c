#pragma once

#include <cstdint>
#include <vector>

#include "turbrec/field.hpp"
#include "turbrec/image.hpp"
#include "turbrec/tape.hpp"

namespace turb::tiltnet {

// Encoder-decoder predicting the 2-channel displacement field in pixels from
// a single grayscale degraded image. Three stride-2 conv blocks down, three
// (nearest-neighbor 2x upsample + conv) blocks up, linear output.
struct TiltNetConfig {
  std::vector<int> encoder_channels{16, 32, 64};
  std::vector<int> decoder_channels{32, 16, 2};  // last layer emits (dx, dy)
};

struct TiltNetParams {
  TiltNetConfig config;
  std::vector<Tensor> enc_w, enc_b;
  std::vector<Tensor> dec_w, dec_b;

  static TiltNetParams init(const TiltNetConfig& config, std::uint64_t seed);
  void validate() const;
};

struct TiltNetParamIds {
  std::vector<ValueId> enc_w, enc_b, dec_w, dec_b;
};
TiltNetParamIds insert_params(Tape& tape, const TiltNetParams& p, bool requires_grad);
// gray: [1,H,W] with H, W divisible by 8 -> [2,H,W]
ValueId forward_on_tape(Tape& tape, ValueId gray, const TiltNetParamIds& ids);

// Single forward pass; multi-channel images are reduced by channel mean.
field::TiltMap predict_tilt(const TiltNetParams& params, const img::Image& image);

// Sampling ranges for synthetic training fields; alpha stays at the
// Kolmogorov default.
struct SpecRanges {
  double corr_length_min = 4.0;
  double corr_length_max = 16.0;
  double strength_min = 0.5;
  double strength_max = 2.5;
  double alpha = 5.0 / 3.0;
};

struct TiltTrainSample {
  img::Image degraded;    // grayscale warped image
  field::TiltMap target;  // the field that produced it
};

// n_per_image samples per pristine image: corr_length and strength drawn
// uniformly from the ranges, fresh field seeds. Deterministic in seed.
std::vector<TiltTrainSample> synth_training_set(const std::vector<img::Image>& pristine,
                                                int n_per_image, const SpecRanges& ranges,
                                                std::uint64_t seed);

struct TiltTrainConfig {
  int epochs = 10;
  int batch_size = 8;
  double lr = 0.05;
  double sgd_momentum = 0.9;
  std::uint64_t seed = 0;
  TiltNetConfig net;
};

struct TiltTrainResult {
  TiltNetParams params;
  std::vector<double> epoch_loss;
};

// Minibatch SGD on the MSE between predicted and true displacement fields.
TiltTrainResult train_tilt_predictor(const std::vector<TiltTrainSample>& samples,
                                     const TiltTrainConfig& config);

}  // namespace turb::tiltnet
