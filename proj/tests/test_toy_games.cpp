#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "avshap/error.hpp"
#include "avshap/estimators.hpp"
#include "avshap/keyvalue.hpp"
#include "avshap/metrics.hpp"
#include "avshap/toy_games.hpp"

using namespace avshap;

namespace {

ToyGameSpec spec_of(ToyKind kind, std::size_t a, std::size_t v, std::size_t t, std::uint64_t seed) {
  ToyGameSpec s;
  s.kind = kind;
  s.partition = FeaturePartition(a, v);
  s.t_len = t;
  s.seed = seed;
  return s;
}

double modality_mass(const ShapleyMatrix& m, Modality mod) {
  double sum = 0.0;
  const auto r = m.partition().players(mod);
  for (std::size_t p = r.begin; p < r.end; ++p) {
    for (double x : m.row(p)) sum += std::abs(x);
  }
  return sum;
}

}  // namespace

TEST_CASE("one-player additive game") {
  ToyGameSpec s;
  s.partition = FeaturePartition(1, 0);
  s.weights = {{0.7}};
  s.bias = {-2.0};
  auto o = build_toy_oracle(s);
  CHECK(o->score(CoalitionMask::full(1))[0] == doctest::Approx(-1.3).epsilon(1e-15));
  CHECK(o->score(CoalitionMask::empty(1))[0] == -2.0);
  CHECK(estimate_exact(*o, s.partition).at(0, 0) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("seeded coefficients fall in their ranges and are reproducible") {
  auto a = build_toy_oracle(spec_of(ToyKind::Additive, 3, 3, 5, 99));
  auto b = build_toy_oracle(spec_of(ToyKind::Additive, 3, 3, 5, 99));
  auto c = build_toy_oracle(spec_of(ToyKind::Additive, 3, 3, 5, 100));
  bool differs = false;
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t t = 0; t < 5; ++t) {
      CHECK(a->weight(p, t) >= -1.0);
      CHECK(a->weight(p, t) < 1.0);
      CHECK(a->weight(p, t) == b->weight(p, t));
      differs = differs || a->weight(p, t) != c->weight(p, t);
    }
  }
  CHECK(differs);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(a->bias(t) >= -3.0);
    CHECK(a->bias(t) < -1.0);
  }
}

TEST_CASE("repeated scores are bit-identical") {
  auto o = build_toy_oracle(spec_of(ToyKind::PairwiseInteraction, 4, 3, 6, 5));
  CoalitionMask m(7);
  m.set(1, true);
  m.set(5, true);
  CHECK(o->score(m) == o->score(m));
}

TEST_CASE("additive games: every method agrees with the weights") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto o = build_toy_oracle(spec_of(ToyKind::Additive, 4, 3, 4, seed));
    const auto closed = o->closed_form_shapley();
    REQUIRE(closed);
    const auto brute = brute_force_shapley(*o, o->partition());
    const auto exact = estimate_exact(*o, o->partition());
    for (std::size_t i = 0; i < closed->values().size(); ++i) {
      CHECK(std::abs(brute.values()[i] - closed->values()[i]) <= 1e-12);
      CHECK(std::abs(exact.values()[i] - closed->values()[i]) <= 1e-12);
    }
  }
  CHECK_FALSE(build_toy_oracle(spec_of(ToyKind::PairwiseInteraction, 2, 2, 1, 0))->closed_form_shapley());
}

TEST_CASE("brute force matches exact on random interaction games") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto s = spec_of(ToyKind::PairwiseInteraction, 4 + seed % 2, 4, 3, 70 + seed);
    auto o = build_toy_oracle(s);
    const auto e = estimate_exact(*o, s.partition);
    const auto b = brute_force_shapley(*o, s.partition);
    for (std::size_t i = 0; i < e.values().size(); ++i) CHECK(std::abs(e.values()[i] - b.values()[i]) <= 1e-10);
  }
}

TEST_CASE("brute force: two-player hand example and cap") {
  FunctionOracle f(1, [](const CoalitionMask& m) {
    return TokenScores{m.test(0) * 1.0 + m.test(1) * 2.0 + m.test(0) * m.test(1) * 1.0};
  });
  const auto b = brute_force_shapley(f, FeaturePartition(1, 1));
  CHECK(b.at(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(b.at(1, 0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(b.method() == Method::BruteForce);
  FunctionOracle big(1, [](const CoalitionMask&) { return TokenScores{0.0}; });
  CHECK_THROWS_AS(brute_force_shapley(big, FeaturePartition(9, 8)), EstimatorError);
}

TEST_CASE("block diagonal: three blocks give an identity heatmap") {
  auto s = spec_of(ToyKind::BlockDiagonal, 3, 3, 9, 12);
  s.blocks = 3;
  auto o = build_toy_oracle(s);
  const auto m = estimate_exact(*o, s.partition);
  for (Modality mod : {Modality::Audio, Modality::Video}) {
    const auto al = alignment_shap(m, mod, 3, 3);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t w = 0; w < 3; ++w) CHECK(al.h[k][w] == doctest::Approx(k == w ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("SNR reliability") {
  CHECK(snr_reliability(0.0) == 0.5);
  CHECK(snr_reliability(std::numeric_limits<double>::infinity()) == 1.0);
  CHECK(snr_reliability(10.0) == doctest::Approx(10.0 / 11.0));
  CHECK(snr_reliability(-10.0) == doctest::Approx(0.1 / 1.1));
}

TEST_CASE("SNR mixture halves the audio mass at 0 dB") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto s = spec_of(ToyKind::SnrMixture, 4, 3, 5, seed);
    auto clean = build_toy_oracle(s);
    s.snr_db = 0.0;
    auto noisy = build_toy_oracle(s);
    const auto mc = estimate_exact(*clean, s.partition);
    const auto mn = estimate_exact(*noisy, s.partition);
    CHECK(modality_mass(mn, Modality::Audio) ==
          doctest::Approx(0.5 * modality_mass(mc, Modality::Audio)).epsilon(1e-13));
    CHECK(modality_mass(mn, Modality::Video) == doctest::Approx(modality_mass(mc, Modality::Video)).epsilon(1e-13));
  }
}

TEST_CASE("spec validation") {
  auto s = spec_of(ToyKind::SnrMixture, 2, 2, 3, 0);
  s.snr_db = -11;
  CHECK_THROWS_AS(build_toy_oracle(s), ConfigError);
  s = spec_of(ToyKind::BlockDiagonal, 2, 2, 3, 0);
  s.blocks = 3;
  CHECK_THROWS_AS(build_toy_oracle(s), ConfigError);
  s = spec_of(ToyKind::Additive, 2, 2, 3, 0);
  s.weights = {{1, 2, 3}};
  CHECK_THROWS_AS(build_toy_oracle(s), ConfigError);
  s.weights.clear();
  s.null_players = {4};
  CHECK_THROWS_AS(build_toy_oracle(s), ConfigError);
  CHECK_THROWS_AS(parse_toy_kind("cubic"), ConfigError);
}

TEST_CASE("specs survive a text round trip") {
  std::mt19937_64 rng(2024);
  const ToyKind kinds[] = {ToyKind::Additive, ToyKind::PairwiseInteraction, ToyKind::BlockDiagonal,
                           ToyKind::SnrMixture};
  for (int trial = 0; trial < 200; ++trial) {
    ToyGameSpec s;
    s.kind = kinds[rng() % 4];
    const std::size_t ga = 1 + rng() % 2, na = ga * (1 + rng() % 4), nv = 1 + rng() % 4;
    s.partition = FeaturePartition(na, nv, ga, 1);
    s.t_len = 4 + rng() % 5;
    s.seed = rng() >> 1;
    s.blocks = s.kind == ToyKind::BlockDiagonal ? 1 : 1 + rng() % 3;
    const double snrs[] = {-10, -4.5, 0, 7.25, std::numeric_limits<double>::infinity()};
    s.snr_db = snrs[rng() % 5];
    s.interaction_scale = static_cast<double>(rng() % 1000) / 37.0;
    if (rng() % 2) {
      s.weights.assign(s.partition.n_players(), std::vector<double>(s.t_len));
      for (auto& row : s.weights) {
        for (double& w : row) w = std::ldexp(static_cast<double>(rng() % 2000001) - 1e6, -(int)(rng() % 40));
      }
      s.bias.assign(s.t_len, 0.1 * static_cast<double>(trial) - 7.0 / 3.0);
    }
    if (rng() % 3 == 0) s.null_players = {0};

    KvDocument doc;
    write_toy_spec(s, doc);
    const auto back = read_toy_spec(parse_kv(doc.to_text()));
    CHECK(back == s);
  }
}

TEST_CASE("spec reader rejects unknown keys") {
  CHECK_THROWS_AS(read_toy_spec(parse_kv("[toy]\nkind = \"additive\"\nn_audio = 1\nn_video = 0\nt_len = 1\nweigths = [[1]]\n")),
                  ConfigError);
  CHECK_THROWS_AS(read_toy_spec(parse_kv("[other]\nx = 1\n")), ConfigError);
}
