#pragma once

#include <cstdint>
#include <vector>

#include "turbrec/attention.hpp"
#include "turbrec/image.hpp"
#include "turbrec/tape.hpp"

namespace turb::ident {

// Per-identity center embeddings acting as a non-parametric classifier.
// Rows stay L2-normalized through init and every update.
struct MemoryBank {
  Tensor centers;        // [nc, D]
  double momentum = 0.5;
  double tau = 0.1;

  int nc() const { return centers.dim(0); }
  int dim() const { return centers.dim(1); }

  static MemoryBank init(int nc, int dim, double momentum, double tau, std::uint64_t seed);
  void validate() const;
};

// p_j = exp(c_j . f / tau) / sum_k exp(c_k . f / tau), log-sum-exp stable.
// The caller provides a unit-norm embedding.
std::vector<double> class_probability(const MemoryBank& bank, const Tensor& f);

// -log p_label for one sample.
double identity_loss(const MemoryBank& bank, const Tensor& f, int label);

// c_label <- normalize(m*c_label + (1-m)*f); other rows untouched. If the
// blend cancels to zero the old center is kept.
void update_center(MemoryBank& bank, int label, const Tensor& f);

enum class Domain { kGallery, kQuery };
Domain parse_domain(const std::string& name);
std::string domain_name(Domain d);

struct LabeledSample {
  img::Image image;
  int label = 0;
  Domain domain = Domain::kGallery;
};

// Three 3x3 stride-2 conv blocks with relu; the desk-scale stand-in for an
// intermediate backbone stage. Output channels must match the attention
// head's input channels.
struct BackboneConfig {
  int in_channels = 1;
  std::vector<int> channels{8, 16, 32};
};

struct BackboneParams {
  BackboneConfig config;
  std::vector<Tensor> weights;  // [C_out,C_in,3,3] per layer
  std::vector<Tensor> biases;   // [C_out] per layer

  static BackboneParams init(const BackboneConfig& config, std::uint64_t seed);
  void validate() const;
};

struct BackboneParamIds {
  std::vector<ValueId> weights;
  std::vector<ValueId> biases;
};
BackboneParamIds insert_params(Tape& tape, const BackboneParams& p, bool requires_grad);
ValueId forward_on_tape(Tape& tape, ValueId image, const BackboneParamIds& ids);

// Trained state: feature extractor, projection head and class centers.
struct IdentityModel {
  BackboneParams backbone;
  attn::AttentionParams attention;
  MemoryBank bank;
  std::vector<int> train_labels;  // identities seen during training, sorted
};

// Full inference path: backbone -> attention head -> pooled unit embedding.
Tensor embed(const IdentityModel& model, const img::Image& image);

struct IdentityTrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double lr = 0.01;
  double sgd_momentum = 0.9;
  double center_momentum = 0.5;
  double tau = 0.1;
  std::uint64_t seed = 0;
  BackboneConfig backbone;
  attn::AttentionConfig attention{32, 16};
};

struct IdentityTrainResult {
  IdentityModel model;
  std::vector<double> epoch_loss;
};

// Weakly supervised training over mixed pristine/turbulent samples: for each
// minibatch, forward to embeddings, negative log likelihood against the
// memory bank, SGD on network parameters, then momentum updates of the
// touched centers. Labels must be contiguous 0..nc-1 with nc >= 2 and both
// domains present. Deterministic given config.seed.
IdentityTrainResult train_identity(const std::vector<LabeledSample>& samples,
                                   const IdentityTrainConfig& config);

}  // namespace turb::ident
