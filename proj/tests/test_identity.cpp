#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "turbrec/benchmark.hpp"
#include "turbrec/identity.hpp"
#include "turbrec/warp.hpp"

using turb::Rng;
using turb::Tensor;
using turb::ident::Domain;
using turb::ident::IdentityTrainConfig;
using turb::ident::LabeledSample;
using turb::ident::MemoryBank;

namespace {

Tensor unit_vector(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor v = Tensor::zeros({dim});
  for (double& x : v.data) x = rng.next_gaussian();
  return turb::l2_normalize(v);
}

// four identities, pristine base plus tilt-warped copies
std::vector<LabeledSample> tiny_dataset(int n_ids, int turb_per_id, std::uint64_t seed) {
  std::vector<LabeledSample> out;
  for (int id = 0; id < n_ids; ++id) {
    turb::img::Image base = turb::bench::procedural_pattern(16, 16, 1.5, seed + 100 * id);
    out.push_back({base, id, Domain::kGallery});
    for (int i = 0; i < turb_per_id; ++i) {
      turb::field::FieldSpec s;
      s.height = 16;
      s.width = 16;
      s.corr_length = 8.0;
      s.strength = 2.0;
      s.seed = seed + 100 * id + 2 * i + 1;
      out.push_back({turb::img::apply_tilt(base, turb::field::generate_tilt_map(s)), id, Domain::kQuery});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("class probability closed forms") {
  SUBCASE("opposed centers, query on one of them") {
    MemoryBank bank = MemoryBank::init(2, 8, 0.5, 0.1, 1);
    Tensor f = unit_vector(8, 42);
    for (int j = 0; j < 8; ++j) {
      bank.centers(0, j) = f(j);
      bank.centers(1, j) = -f(j);
    }
    auto p = turb::ident::class_probability(bank, f);
    const double expected = std::exp(10.0) / (std::exp(10.0) + std::exp(-10.0));
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("identical centers give the uniform distribution") {
    MemoryBank bank = MemoryBank::init(5, 8, 0.5, 0.1, 2);
    Tensor c = unit_vector(8, 3);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 8; ++j) bank.centers(i, j) = c(j);
    auto p = turb::ident::class_probability(bank, unit_vector(8, 4));
    for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }

  SUBCASE("probabilities sum to one on random input") {
    MemoryBank bank = MemoryBank::init(7, 16, 0.5, 0.1, 5);
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto p = turb::ident::class_probability(bank, unit_vector(16, 100 + s));
      double sum = 0.0;
      for (double v : p) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }

  SUBCASE("dimension mismatch is a hard error") {
    MemoryBank bank = MemoryBank::init(3, 8, 0.5, 0.1, 6);
    CHECK_THROWS_AS(turb::ident::class_probability(bank, unit_vector(9, 7)), std::invalid_argument);
  }
}

TEST_CASE("identity loss examples") {
  MemoryBank bank = MemoryBank::init(4, 8, 0.5, 0.1, 8);

  SUBCASE("probability near one gives loss near zero") {
    Tensor f = unit_vector(8, 9);
    for (int j = 0; j < 8; ++j) {
      bank.centers(0, j) = f(j);
      bank.centers(1, j) = -f(j);
      bank.centers(2, j) = -f(j);
      bank.centers(3, j) = -f(j);
    }
    CHECK(turb::ident::identity_loss(bank, f, 0) < 1e-8);
  }

  SUBCASE("identical centers give log(nc)") {
    Tensor c = unit_vector(8, 10);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 8; ++j) bank.centers(i, j) = c(j);
    CHECK(turb::ident::identity_loss(bank, unit_vector(8, 11), 2) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }

  SUBCASE("random instance matches the direct formula") {
    MemoryBank b2 = MemoryBank::init(5, 12, 0.5, 0.1, 12);
    Tensor f = unit_vector(12, 13);
    auto p = turb::ident::class_probability(b2, f);
    for (int label = 0; label < 5; ++label)
      CHECK(turb::ident::identity_loss(b2, f, label) ==
            doctest::Approx(-std::log(p[static_cast<size_t>(label)])).epsilon(1e-10));
  }
}

TEST_CASE("center updates") {
  SUBCASE("momentum one leaves the center unchanged") {
    MemoryBank bank = MemoryBank::init(3, 8, 0.5, 0.1, 14);
    bank.momentum = 1.0 - 1e-12;  // m -> 1 limit
    Tensor before = bank.centers;
    turb::ident::update_center(bank, 1, unit_vector(8, 15));
    for (int j = 0; j < 8; ++j)
      CHECK(bank.centers(1, j) == doctest::Approx(before(1, j)).epsilon(1e-9));
  }

  SUBCASE("momentum zero replaces the center") {
    MemoryBank bank = MemoryBank::init(3, 8, 0.0, 0.1, 16);
    Tensor f = unit_vector(8, 17);
    turb::ident::update_center(bank, 2, f);
    for (int j = 0; j < 8; ++j) CHECK(bank.centers(2, j) == doctest::Approx(f(j)).epsilon(1e-15));
  }

  SUBCASE("momentum 0.5 with orthogonal unit vectors") {
    MemoryBank bank = MemoryBank::init(2, 4, 0.5, 0.1, 18);
    bank.centers = Tensor({2, 4}, {1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0});
    Tensor f({4}, {0.0, 0.0, 1.0, 0.0});
    turb::ident::update_center(bank, 0, f);
    // normalize((beta+f)/2) = (beta+f)/sqrt(2)
    CHECK(bank.centers(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(bank.centers(0, 2) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(bank.centers(0, 1) == 0.0);
    // untouched row
    CHECK(bank.centers(1, 1) == 1.0);
  }

  SUBCASE("rows stay unit-norm under arbitrary update sequences") {
    MemoryBank bank = MemoryBank::init(4, 8, 0.7, 0.1, 19);
    Rng rng(20);
    for (int step = 0; step < 200; ++step) {
      const int label = static_cast<int>(rng.next_u64() % 4);
      turb::ident::update_center(bank, label, unit_vector(8, 500 + step));
    }
    bank.validate();  // throws if any row drifts off unit norm
  }
}

TEST_CASE("probability is stable under logit shifts and embedding scale") {
  MemoryBank bank = MemoryBank::init(4, 8, 0.5, 0.1, 21);

  SUBCASE("softmax shift invariance at extreme logits") {
    // crafted so logits sit at the +-1/tau extremes; must stay finite
    Tensor f = unit_vector(8, 22);
    for (int j = 0; j < 8; ++j) {
      bank.centers(0, j) = f(j);
      bank.centers(1, j) = -f(j);
      bank.centers(2, j) = f(j);
      bank.centers(3, j) = -f(j);
    }
    auto p = turb::ident::class_probability(bank, f);
    for (double v : p) CHECK(std::isfinite(v));
    CHECK(p[0] == doctest::Approx(p[2]).epsilon(1e-12));
    // reference computed with explicitly shifted exponents
    const double z = 2.0 * std::exp(0.0) + 2.0 * std::exp(-20.0);
    CHECK(p[0] == doctest::Approx(std::exp(0.0) / z).epsilon(1e-12));
  }

  SUBCASE("positive scaling before normalization keeps the argmax") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Rng rng(300 + s);
      Tensor raw = Tensor::uniform({8}, 1.0, rng);
      Tensor f1 = turb::l2_normalize(raw);
      Tensor scaled = raw;
      for (double& v : scaled.data) v *= 37.5;
      Tensor f2 = turb::l2_normalize(scaled);
      auto p1 = turb::ident::class_probability(bank, f1);
      auto p2 = turb::ident::class_probability(bank, f2);
      const auto arg1 = std::max_element(p1.begin(), p1.end()) - p1.begin();
      const auto arg2 = std::max_element(p2.begin(), p2.end()) - p2.begin();
      CHECK(arg1 == arg2);
    }
  }
}

TEST_CASE("train_identity input validation") {
  auto data = tiny_dataset(2, 2, 900);
  IdentityTrainConfig cfg;
  cfg.epochs = 0;

  SUBCASE("single class is rejected") {
    std::vector<LabeledSample> one;
    for (const auto& s : data)
      if (s.label == 0) one.push_back(s);
    CHECK_THROWS_AS(turb::ident::train_identity(one, cfg), std::invalid_argument);
  }

  SUBCASE("missing domain is rejected") {
    std::vector<LabeledSample> pristine_only;
    for (const auto& s : data)
      if (s.domain == Domain::kGallery) pristine_only.push_back(s);
    CHECK_THROWS_AS(turb::ident::train_identity(pristine_only, cfg), std::invalid_argument);
  }

  SUBCASE("non-contiguous labels are rejected") {
    auto shifted = data;
    for (auto& s : shifted) s.label += 1;
    CHECK_THROWS_AS(turb::ident::train_identity(shifted, cfg), std::invalid_argument);
  }
}

TEST_CASE("zero epochs returns the deterministic initial state") {
  auto data = tiny_dataset(3, 2, 901);
  IdentityTrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 5;
  auto a = turb::ident::train_identity(data, cfg);
  auto b = turb::ident::train_identity(data, cfg);
  CHECK(a.epoch_loss.empty());
  CHECK(a.model.bank.centers.data == b.model.bank.centers.data);
  CHECK(a.model.attention.w_q.data == b.model.attention.w_q.data);
  CHECK(a.model.backbone.weights[0].data == b.model.backbone.weights[0].data);
  a.model.bank.validate();
}

TEST_CASE("initial loss sits near log(nc) when logits are small") {
  // with tau = 1 the logits are at most +-1, so probabilities start near
  // uniform; tau = 0.1 amplifies center alignment tenfold and does not
  auto data = tiny_dataset(4, 4, 902);
  IdentityTrainConfig cfg;
  cfg.epochs = 0;
  cfg.tau = 1.0;
  cfg.seed = 3;
  auto init = turb::ident::train_identity(data, cfg);
  double acc = 0.0;
  for (const auto& s : data)
    acc += turb::ident::identity_loss(init.model.bank, turb::ident::embed(init.model, s.image), s.label);
  acc /= static_cast<double>(data.size());
  CHECK(acc == doctest::Approx(std::log(4.0)).epsilon(0.1));
}

TEST_CASE("training separates the four synthetic identities") {
  auto data = tiny_dataset(4, 8, 903);
  IdentityTrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 5;
  auto res = turb::ident::train_identity(data, cfg);
  REQUIRE(res.epoch_loss.size() == 200);
  // statistical trend, not strict monotonicity
  CHECK(res.epoch_loss.back() < 0.5 * res.epoch_loss.front());

  std::vector<std::pair<int, Tensor>> embs;
  for (const auto& s : data) embs.push_back({s.label, turb::ident::embed(res.model, s.image)});
  double intra = 0.0, inter = 0.0;
  int ni = 0, nj = 0;
  for (size_t i = 0; i < embs.size(); ++i)
    for (size_t j = i + 1; j < embs.size(); ++j) {
      const double c = turb::dot(embs[i].second, embs[j].second);
      if (embs[i].first == embs[j].first) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++nj;
      }
    }
  CHECK(intra / ni - inter / nj >= 0.2);
}

TEST_CASE("training is bit-deterministic given the seed") {
  auto data = tiny_dataset(2, 3, 904);
  IdentityTrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 11;
  auto a = turb::ident::train_identity(data, cfg);
  auto b = turb::ident::train_identity(data, cfg);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.model.bank.centers.data == b.model.bank.centers.data);
  CHECK(a.model.attention.w_v.data == b.model.attention.w_v.data);
}
