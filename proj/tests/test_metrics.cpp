#include "doctest.h"

#include <cmath>
#include <limits>

#include "avshap/error.hpp"
#include "avshap/estimators.hpp"
#include "avshap/metrics.hpp"
#include "avshap/toy_games.hpp"

using namespace avshap;

namespace {

ShapleyMatrix matrix_of(const FeaturePartition& part, std::vector<std::vector<double>> rows) {
  ShapleyMatrix m(part, rows.front().size(), Method::Exact);
  for (std::size_t p = 0; p < rows.size(); ++p) {
    for (std::size_t t = 0; t < rows[p].size(); ++t) m.at(p, t) = rows[p][t];
  }
  return m;
}

std::vector<std::vector<double>> filled(std::size_t k, double diag, double off) {
  std::vector<std::vector<double>> h(k, std::vector<double>(k, off));
  for (std::size_t i = 0; i < k; ++i) h[i][i] = diag;
  return h;
}

}  // namespace

TEST_CASE("global balance") {
  SUBCASE("audio-only mass") {
    const auto g = global_shap(matrix_of(FeaturePartition(2, 1), {{0.3, -0.1}, {2, 0}, {0, 0}}));
    CHECK(g.defined);
    CHECK(g.a_shap == 1.0);
    CHECK(g.v_shap == 0.0);
  }
  SUBCASE("absolute values") {
    const auto g = global_shap(matrix_of(FeaturePartition(2, 2), {{1}, {0}, {-1}, {0}}));
    CHECK(g.a_shap == 0.5);
    CHECK(g.total_mass == 2.0);
  }
  SUBCASE("zero mass is undefined, not balanced") {
    const auto g = global_shap(matrix_of(FeaturePartition(1, 1), {{0, 0}, {0, 0}}));
    CHECK_FALSE(g.defined);
  }
  SUBCASE("interaction game with three times the audio mass") {
    // f(0)=0, f(a)=2, f(v)=0, f(av)=4: phi_a = 3, phi_v = 1.
    FunctionOracle f(1, [](const CoalitionMask& m) {
      return TokenScores{2.0 * m.test(0) + 2.0 * m.test(0) * m.test(1)};
    });
    const auto g = global_shap(estimate_exact(f, FeaturePartition(1, 1)));
    CHECK(g.a_shap == doctest::Approx(0.75).epsilon(1e-15));
  }
}

TEST_CASE("generative windows") {
  const FeaturePartition part(1, 1);
  const auto m = matrix_of(part, {{1, 1, 1, 1, 1, 1, 1}, {1, 2, 3, 0, 0, 0, 5}});
  const auto g = generative_shap(m, 3);
  REQUIRE(g.size() == 3);
  CHECK(g.windows[0] == IndexRange{0, 3});
  CHECK(g.windows[1] == IndexRange{3, 5});
  CHECK(g.windows[2] == IndexRange{5, 7});
  CHECK(g.a_shap[0] == doctest::Approx(3.0 / 9));
  CHECK(g.a_shap[1] == 1.0);
  CHECK(g.a_shap[2] == doctest::Approx(2.0 / 7));
  CHECK(g.v_shap(2) == doctest::Approx(5.0 / 7));
  CHECK(g.mass[1] == 2.0);
  CHECK(generative_shap(m, 1).a_shap[0] == global_shap(m).a_shap);
  CHECK_THROWS_AS(generative_shap(m, 8), MetricError);
  CHECK_THROWS_AS(generative_shap(m, 0), MetricError);
}

TEST_CASE("zero-mass window is flagged") {
  const auto m = matrix_of(FeaturePartition(1, 1), {{1, 0}, {1, 0}});
  const auto g = generative_shap(m, 2);
  CHECK(g.defined[0]);
  CHECK_FALSE(g.defined[1]);
}

TEST_CASE("late tokens driven by audio only") {
  // Tokens 4 and 5 ignore the video players.
  FunctionOracle f(6, [](const CoalitionMask& m) {
    TokenScores s(6, -2.0);
    for (std::size_t t = 0; t < 6; ++t) {
      s[t] += 0.4 * m.test(0) + 0.3 * m.test(1) * m.test(0) + 0.2 * m.test(1);
      if (t < 4) s[t] += 0.5 * m.test(2) - 0.25 * m.test(3) * m.test(0);
    }
    return s;
  });
  const auto g = generative_shap(estimate_exact(f, FeaturePartition(2, 2)), 3);
  CHECK(g.a_shap[2] == 1.0);
  CHECK(g.a_shap[0] < 1.0);
  CHECK(g.a_shap[1] < 1.0);
}

TEST_CASE("alignment heatmap") {
  SUBCASE("banded game matches independent rational re-aggregation") {
    // 6 audio players, 2 video players, 6 tokens; see the test for the game.
    FunctionOracle f(6, [](const CoalitionMask& m) {
      TokenScores s(6);
      for (std::size_t t = 0; t < 6; ++t) {
        double v = -2.0;
        for (std::size_t a = 0; a < 6; ++a) {
          if (m.test(a)) v += 1.0 / (1.0 + std::abs(static_cast<double>(a) - static_cast<double>(t)));
        }
        if (t < 5 && m.test(t) && m.test(t + 1)) v += 0.5;
        if (m.test(6)) v += static_cast<double>(t + 1) / 5.0;
        if (m.test(7)) v -= 0.1;
        s[t] = v;
      }
      return s;
    });
    const auto m = estimate_exact(f, FeaturePartition(6, 2));
    CHECK(m.at(0, 0) == doctest::Approx(1.25).epsilon(1e-13));
    CHECK(m.at(2, 3) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(m.at(6, 5) == doctest::Approx(1.2).epsilon(1e-13));
    const auto al = alignment_shap(m, Modality::Audio, 3, 3);
    const double want[3][3] = {{0.62674094707520889, 0.23676880222841226, 0.13649025069637882},
                               {0.24390243902439024, 0.54878048780487809, 0.2073170731707317},
                               {0.13649025069637882, 0.2785515320334262, 0.58495821727019504}};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(std::abs(al.h[i][j] - want[i][j]) <= 1e-12);
    }
    REQUIRE(al.diagonal_score);
    CHECK(*al.diagonal_score == doctest::Approx(2.8405820932335772).epsilon(1e-12));
  }
  SUBCASE("video bins use absolute player indices") {
    const auto m = matrix_of(FeaturePartition(2, 4), {{1, 1}, {1, 1}, {1, 0}, {1, 0}, {0, 1}, {0, 2}});
    const auto al = alignment_shap(m, Modality::Video, 2, 2);
    CHECK(al.feature_bins[0] == IndexRange{2, 4});
    CHECK(al.h[0] == std::vector<double>{1.0, 0.0});
    CHECK(al.h[1][1] == doctest::Approx(1.0));
    CHECK(al.diagonal_score);
    CHECK(std::isinf(*al.diagonal_score));
  }
  SUBCASE("zero-mass row is undefined and suppresses the score") {
    const auto m = matrix_of(FeaturePartition(2, 0), {{1, 2}, {0, 0}});
    const auto al = alignment_shap(m, Modality::Audio, 2, 2);
    CHECK(al.row_defined[0]);
    CHECK_FALSE(al.row_defined[1]);
    CHECK(al.h[1] == std::vector<double>{0.0, 0.0});
    CHECK_FALSE(al.diagonal_score);
  }
  SUBCASE("no score unless square") {
    const auto m = matrix_of(FeaturePartition(2, 0), {{1, 2, 3}, {1, 0, 0}});
    CHECK_FALSE(alignment_shap(m, Modality::Audio, 2, 3).diagonal_score);
  }
  SUBCASE("bin counts are checked") {
    const auto m = matrix_of(FeaturePartition(2, 1), {{1, 2}, {1, 0}, {0, 1}});
    CHECK_THROWS_AS(alignment_shap(m, Modality::Video, 2, 1), MetricError);
    CHECK_THROWS_AS(alignment_shap(m, Modality::Audio, 1, 3), MetricError);
  }
  SUBCASE("permuting players inside a bin changes nothing") {
    const auto a = matrix_of(FeaturePartition(4, 0), {{1, 2}, {3, 0}, {0.5, 0.5}, {2, 7}});
    const auto b = matrix_of(FeaturePartition(4, 0), {{3, 0}, {1, 2}, {2, 7}, {0.5, 0.5}});
    CHECK(alignment_shap(a, Modality::Audio, 2, 2).h == alignment_shap(b, Modality::Audio, 2, 2).h);
  }
}

TEST_CASE("uniform game gives flat rows") {
  ToyGameSpec s;
  s.partition = FeaturePartition(8, 4);
  s.t_len = 8;
  s.weights.assign(12, std::vector<double>(8, -0.5));
  auto o = build_toy_oracle(s);
  const auto al = alignment_shap(estimate_exact(*o, s.partition), Modality::Audio, 4, 4);
  for (const auto& row : al.h) {
    for (double x : row) CHECK(x == doctest::Approx(0.25).epsilon(1e-14));
  }
  CHECK(*al.diagonal_score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diagonal score") {
  CHECK(diagonal_alignment_score(filled(10, 0.1, 0.1)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::isinf(diagonal_alignment_score(filled(10, 1.0, 0.0))));
  CHECK(diagonal_alignment_score(filled(10, 0.4, 0.6 / 9)) == doctest::Approx(6.0).epsilon(1e-13));
  CHECK_THROWS_AS(diagonal_alignment_score({{1.0, 0.0}}), MetricError);
  CHECK_THROWS_AS(diagonal_alignment_score({{1.0}}), MetricError);
}

TEST_CASE("group aggregation skips undefined values") {
  const std::vector<std::optional<double>> v{0.2, std::nullopt, 0.4, 0.6};
  const auto s = aggregate_defined(v);
  CHECK(s.count == 3);
  CHECK(s.undefined == 1);
  CHECK(s.mean == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s.stddev == doctest::Approx(std::sqrt(0.08 / 3)).epsilon(1e-14));
  const std::vector<std::optional<double>> none{std::nullopt};
  CHECK(aggregate_defined(none).count == 0);
}
