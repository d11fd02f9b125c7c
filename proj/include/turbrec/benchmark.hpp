#pragma once

#include <cstdint>
#include <vector>

#include "turbrec/field.hpp"
#include "turbrec/identity.hpp"
#include "turbrec/image.hpp"

namespace turb::bench {

// Self-contained synthetic benchmark: procedural identity patterns, a
// pristine gallery and tilt-degraded queries for identities never seen in
// training. Everything derives from the master seed.
struct BenchmarkConfig {
  std::uint64_t seed = 7;
  int n_identities = 8;
  int n_train_identities = 4;  // identities 0..n_train-1 train, the rest evaluate
  int image_size = 16;
  int queries_per_identity = 8;
  int train_pristine_per_identity = 2;
  int train_turbulent_per_identity = 8;
  double tilt_strength = 2.0;
  double corr_length = 8.0;
  double alpha = 5.0 / 3.0;
  double pattern_alpha = 1.5;  // texture spectrum of the identity patterns

  void validate() const;
};

// Smooth random texture in [0,1] from a power-law field; distinct seeds give
// distinct identities.
img::Image procedural_pattern(int h, int w, double alpha, std::uint64_t seed);

struct GalleryItem {
  int identity = 0;
  img::Image image;
};

struct QueryItem {
  int identity = 0;
  img::Image image;
  field::TiltMap gt_tilt;  // the field that produced this query
};

struct BenchmarkData {
  BenchmarkConfig config;
  std::vector<ident::LabeledSample> train_samples;  // labels 0..n_train-1, both domains
  std::vector<GalleryItem> gallery;                 // one pristine image per unseen identity
  std::vector<QueryItem> queries;                   // tilt-warped copies of gallery identities
};

BenchmarkData make_benchmark(const BenchmarkConfig& config);

}  // namespace turb::bench
