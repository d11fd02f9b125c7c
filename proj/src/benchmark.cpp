#include "turbrec/benchmark.hpp"

#include <stdexcept>

#include "turbrec/warp.hpp"

namespace turb::bench {

void BenchmarkConfig::validate() const {
  if (n_identities < 2) throw std::invalid_argument("benchmark needs at least 2 identities");
  if (n_train_identities < 2 || n_train_identities >= n_identities)
    throw std::invalid_argument("need 2 <= train identities < total identities");
  if (image_size < 8 || image_size % 8 != 0)
    throw std::invalid_argument("image size must be a positive multiple of 8");
  if (queries_per_identity < 1 || train_pristine_per_identity < 1 || train_turbulent_per_identity < 1)
    throw std::invalid_argument("per-identity sample counts must be positive");
  if (tilt_strength < 0.0 || corr_length <= 0.0) throw std::invalid_argument("bad tilt parameters");
}

img::Image procedural_pattern(int h, int w, double alpha, std::uint64_t seed) {
  // Identity signature: two oriented gratings with seed-specific angles,
  // frequencies and phases, plus a correlated random texture on top. The
  // oriented structure gives each identity a stable, transferable signature
  // while the texture keeps patterns from being trivially periodic.
  Rng rng(seed);
  const double theta0 = rng.next_uniform(0.0, 3.14159265358979323846);
  const double theta1 = theta0 + rng.next_uniform(0.9, 2.2);
  const double f0 = rng.next_uniform(1.5, 3.5);
  const double f1 = rng.next_uniform(2.0, 4.5);
  const double phase0 = rng.next_uniform(0.0, 6.28318530717958647692);
  const double phase1 = rng.next_uniform(0.0, 6.28318530717958647692);

  field::FieldSpec spec;
  spec.height = h;
  spec.width = w;
  spec.alpha = alpha;
  spec.corr_length = 1e-6;
  spec.strength = 1.0;
  spec.seed = rng.next_u64();
  field::ScalarField texture = field::generate_scalar_field(spec);

  Tensor values = Tensor::zeros({h, w});
  const double two_pi = 6.28318530717958647692;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u0 = (x * std::cos(theta0) + y * std::sin(theta0)) / w;
      const double u1 = (x * std::cos(theta1) + y * std::sin(theta1)) / w;
      const double g = 0.5 * std::sin(two_pi * f0 * u0 + phase0) + 0.35 * std::sin(two_pi * f1 * u1 + phase1);
      values(y, x) = 0.5 + 0.28 * g + 0.12 * texture.values(y, x);
    }
  return img::Image::from_tensor(std::move(values));
}

namespace {

field::TiltMap tilt_for(const BenchmarkConfig& cfg, std::uint64_t seed, double strength) {
  field::FieldSpec spec;
  spec.height = cfg.image_size;
  spec.width = cfg.image_size;
  spec.alpha = cfg.alpha;
  spec.corr_length = cfg.corr_length;
  spec.strength = strength;
  spec.seed = seed;
  return field::generate_tilt_map(spec);
}

}  // namespace

BenchmarkData make_benchmark(const BenchmarkConfig& config) {
  config.validate();
  BenchmarkData data;
  data.config = config;
  const int s = config.image_size;

  for (int id = 0; id < config.n_identities; ++id) {
    const std::uint64_t id_seed = Rng::derive(config.seed, "identity-" + std::to_string(id));
    img::Image base = procedural_pattern(s, s, config.pattern_alpha, id_seed);

    if (id < config.n_train_identities) {
      // pristine side: the base pattern plus lightly jittered enrollment copies
      data.train_samples.push_back({base, id, ident::Domain::kGallery});
      for (int i = 1; i < config.train_pristine_per_identity; ++i) {
        field::TiltMap jitter = tilt_for(config, id_seed + 1000 + 2 * i, 0.2);
        data.train_samples.push_back({img::apply_tilt(base, jitter), id, ident::Domain::kGallery});
      }
      for (int i = 0; i < config.train_turbulent_per_identity; ++i) {
        field::TiltMap tilt = tilt_for(config, id_seed + 2000 + 2 * i, config.tilt_strength);
        data.train_samples.push_back({img::apply_tilt(base, tilt), id, ident::Domain::kQuery});
      }
    } else {
      data.gallery.push_back({id, base});
      for (int i = 0; i < config.queries_per_identity; ++i) {
        field::TiltMap tilt = tilt_for(config, id_seed + 3000 + 2 * i, config.tilt_strength);
        data.queries.push_back({id, img::apply_tilt(base, tilt), std::move(tilt)});
      }
    }
  }
  return data;
}

}  // namespace turb::bench
