#include "turbrec/identity.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace turb::ident {

MemoryBank MemoryBank::init(int nc, int dim, double momentum, double tau, std::uint64_t seed) {
  if (nc < 2) throw std::invalid_argument("memory bank needs at least 2 classes");
  if (dim < 1) throw std::invalid_argument("embedding dim must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("center momentum must be in [0,1)");
  if (tau <= 0.0) throw std::invalid_argument("temperature must be > 0");
  Rng rng(seed);
  MemoryBank bank;
  bank.momentum = momentum;
  bank.tau = tau;
  bank.centers = Tensor::zeros({nc, dim});
  for (int i = 0; i < nc; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double v = rng.next_gaussian();
      bank.centers(i, j) = v;
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (int j = 0; j < dim; ++j) bank.centers(i, j) *= inv;
  }
  return bank;
}

void MemoryBank::validate() const {
  if (centers.ndim() != 2 || nc() < 2) throw std::invalid_argument("memory bank centers must be [nc>=2, D]");
  for (int i = 0; i < nc(); ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < dim(); ++j) norm2 += centers(i, j) * centers(i, j);
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9)
      throw std::invalid_argument("memory bank row " + std::to_string(i) + " is not unit norm");
  }
}

namespace {

std::vector<double> bank_logits(const MemoryBank& bank, const Tensor& f) {
  if (f.ndim() != 1 || f.dim(0) != bank.dim())
    throw std::invalid_argument("embedding dim " + dims_to_string(f.dims) + " does not match bank dim " +
                                std::to_string(bank.dim()));
  std::vector<double> z(static_cast<size_t>(bank.nc()));
  for (int i = 0; i < bank.nc(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < bank.dim(); ++j) acc += bank.centers(i, j) * f(j);
    z[static_cast<size_t>(i)] = acc / bank.tau;
  }
  return z;
}

}  // namespace

std::vector<double> class_probability(const MemoryBank& bank, const Tensor& f) {
  std::vector<double> z = bank_logits(bank, f);
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

double identity_loss(const MemoryBank& bank, const Tensor& f, int label) {
  if (label < 0 || label >= bank.nc()) throw std::invalid_argument("label out of range");
  std::vector<double> z = bank_logits(bank, f);
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  return std::log(sum) + zmax - z[static_cast<size_t>(label)];
}

void update_center(MemoryBank& bank, int label, const Tensor& f) {
  if (label < 0 || label >= bank.nc()) throw std::invalid_argument("label out of range");
  if (f.ndim() != 1 || f.dim(0) != bank.dim()) throw std::invalid_argument("embedding dim mismatch");
  const double m = bank.momentum;
  std::vector<double> blend(static_cast<size_t>(bank.dim()));
  double norm2 = 0.0;
  for (int j = 0; j < bank.dim(); ++j) {
    blend[static_cast<size_t>(j)] = m * bank.centers(label, j) + (1.0 - m) * f(j);
    norm2 += blend[static_cast<size_t>(j)] * blend[static_cast<size_t>(j)];
  }
  if (norm2 == 0.0) return;  // degenerate cancellation, keep the old center
  const double inv = 1.0 / std::sqrt(norm2);
  for (int j = 0; j < bank.dim(); ++j) bank.centers(label, j) = blend[static_cast<size_t>(j)] * inv;
}

Domain parse_domain(const std::string& name) {
  if (name == "gallery") return Domain::kGallery;
  if (name == "query") return Domain::kQuery;
  throw std::invalid_argument("unknown domain: " + name);
}

std::string domain_name(Domain d) { return d == Domain::kGallery ? "gallery" : "query"; }

BackboneParams BackboneParams::init(const BackboneConfig& config, std::uint64_t seed) {
  if (config.channels.empty()) throw std::invalid_argument("backbone needs at least one layer");
  Rng rng(seed);
  BackboneParams p;
  p.config = config;
  int c_in = config.in_channels;
  for (int c_out : config.channels) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(c_in) * 9.0));  // He-uniform
    p.weights.push_back(Tensor::uniform({c_out, c_in, 3, 3}, bound, rng));
    p.biases.push_back(Tensor::zeros({c_out}));
    c_in = c_out;
  }
  return p;
}

void BackboneParams::validate() const {
  if (weights.size() != config.channels.size() || biases.size() != config.channels.size())
    throw std::invalid_argument("backbone parameter count does not match config");
  int c_in = config.in_channels;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].dims != std::vector<int>{config.channels[i], c_in, 3, 3})
      throw std::invalid_argument("backbone layer " + std::to_string(i) + " has wrong weight dims");
    c_in = config.channels[i];
  }
}

BackboneParamIds insert_params(Tape& tape, const BackboneParams& p, bool requires_grad) {
  p.validate();
  BackboneParamIds ids;
  for (size_t i = 0; i < p.weights.size(); ++i) {
    ids.weights.push_back(tape.input(p.weights[i], requires_grad));
    ids.biases.push_back(tape.input(p.biases[i], requires_grad));
  }
  return ids;
}

ValueId forward_on_tape(Tape& tape, ValueId image, const BackboneParamIds& ids) {
  ValueId h = image;
  for (size_t i = 0; i < ids.weights.size(); ++i)
    h = tape.relu(tape.conv2d(h, ids.weights[i], ids.biases[i], 2, 1));
  // standardized per channel so the head sees well-conditioned,
  // scale-free features regardless of the raw activation magnitude
  return tape.standardize_spatial(h);
}

Tensor embed(const IdentityModel& model, const img::Image& image) {
  Tape tape;
  ValueId x = tape.input(image.pixels, false);
  ValueId features = forward_on_tape(tape, x, insert_params(tape, model.backbone, false));
  ValueId out = attn::forward_on_tape(tape, features, attn::insert_params(tape, model.attention, false));
  return tape.value(attn::pool_embed_on_tape(tape, out));
}

IdentityTrainResult train_identity(const std::vector<LabeledSample>& samples,
                                   const IdentityTrainConfig& config) {
  if (samples.empty()) throw std::invalid_argument("empty training set");
  std::set<int> labels;
  bool has_gallery = false, has_query = false;
  for (const auto& s : samples) {
    labels.insert(s.label);
    has_gallery |= s.domain == Domain::kGallery;
    has_query |= s.domain == Domain::kQuery;
  }
  if (labels.size() < 2) throw std::invalid_argument("training requires at least 2 identities");
  if (!has_gallery || !has_query)
    throw std::invalid_argument("training requires both pristine (gallery) and turbulent (query) samples");
  const int nc = static_cast<int>(labels.size());
  if (*labels.begin() != 0 || *labels.rbegin() != nc - 1)
    throw std::invalid_argument("training labels must be contiguous 0..nc-1");
  if (config.backbone.channels.back() != config.attention.c_in)
    throw std::invalid_argument("backbone output channels must match attention c_in");
  if (config.batch_size < 1 || config.epochs < 0) throw std::invalid_argument("bad batch size or epochs");

  IdentityModel model;
  model.backbone = BackboneParams::init(config.backbone, Rng::derive(config.seed, "backbone"));
  model.attention = attn::AttentionParams::init(config.attention, Rng::derive(config.seed, "attention"));
  model.bank = MemoryBank::init(nc, config.attention.c_out, config.center_momentum, config.tau,
                                Rng::derive(config.seed, "bank"));
  model.train_labels.assign(labels.begin(), labels.end());

  // flat parameter list: backbone layers then attention tensors
  std::vector<Tensor*> params;
  for (auto& w : model.backbone.weights) params.push_back(&w);
  for (auto& b : model.backbone.biases) params.push_back(&b);
  for (Tensor* t : {&model.attention.w_q, &model.attention.b_q, &model.attention.w_k,
                    &model.attention.b_k, &model.attention.w_v, &model.attention.b_v})
    params.push_back(t);
  std::vector<Tensor> velocities;
  for (Tensor* t : params) velocities.push_back(Tensor::zeros(t->dims));

  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle_rng(Rng::derive(config.seed, "order"));

  IdentityTrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      Tape tape;
      BackboneParamIds bb_ids;
      for (size_t i = 0; i < model.backbone.weights.size(); ++i) {
        bb_ids.weights.push_back(tape.input(model.backbone.weights[i], true));
        bb_ids.biases.push_back(tape.input(model.backbone.biases[i], true));
      }
      attn::AttentionParamIds at_ids = attn::insert_params(tape, model.attention, true);
      std::vector<ValueId> param_ids;
      for (ValueId id : bb_ids.weights) param_ids.push_back(id);
      for (ValueId id : bb_ids.biases) param_ids.push_back(id);
      for (ValueId id : {at_ids.w_q, at_ids.b_q, at_ids.w_k, at_ids.b_k, at_ids.w_v, at_ids.b_v})
        param_ids.push_back(id);

      ValueId centers = tape.input(model.bank.centers, false);
      ValueId batch_loss = -1;
      std::vector<std::pair<int, ValueId>> batch_embeddings;
      for (size_t i = start; i < end; ++i) {
        const LabeledSample& s = samples[static_cast<size_t>(order[i])];
        ValueId x = tape.input(s.image.pixels, false);
        ValueId fmap = forward_on_tape(tape, x, bb_ids);
        ValueId att = attn::forward_on_tape(tape, fmap, at_ids);
        ValueId emb = attn::pool_embed_on_tape(tape, att);
        batch_embeddings.emplace_back(s.label, emb);
        ValueId logits = tape.scale(
            tape.reshape(tape.matmul(centers, tape.reshape(emb, {model.bank.dim(), 1})), {nc}),
            1.0 / model.bank.tau);
        ValueId loss = tape.nll_from_logits(logits, s.label);
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

      // centers follow the embeddings that were actually used for the loss
      for (const auto& [label, emb] : batch_embeddings) update_center(model.bank, label, tape.value(emb));
    }
    result.epoch_loss.push_back(epoch_loss / std::max(1, batches));
  }

  result.model = std::move(model);
  return result;
}

}  // namespace turb::ident
