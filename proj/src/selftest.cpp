#include "avshap/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "avshap/estimators.hpp"
#include "avshap/keyvalue.hpp"
#include "avshap/metrics.hpp"
#include "avshap/run.hpp"
#include "avshap/toy_games.hpp"

namespace avshap::selftest {
namespace {

using Clock = std::chrono::steady_clock;

std::string sci(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << v;
  return s.str();
}

ToyGameSpec pairwise_game(std::size_t n_players, std::size_t t_len, std::uint64_t seed,
                          std::size_t audio_group = 1) {
  ToyGameSpec spec;
  spec.kind = ToyKind::PairwiseInteraction;
  const std::size_t audio_players = (n_players + 1) / 2;
  spec.partition = FeaturePartition(audio_players * audio_group, n_players - audio_players,
                                    audio_group, 1);
  spec.t_len = t_len;
  spec.seed = seed;
  return spec;
}

double max_abs_diff(const ShapleyMatrix& a, const ShapleyMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  }
  return d;
}

ShapleyMatrix scaled(const ShapleyMatrix& m, double c) {
  ShapleyMatrix out = m;
  for (auto& v : out.values()) v *= c;
  return out;
}

EstimatorConfig config_for(Method method, std::size_t budget, std::uint64_t seed) {
  EstimatorConfig c;
  c.method = method;
  c.budget_m = budget;
  c.seed = seed;
  return c;
}

template <typename F>
CriterionResult timed(int id, std::string name, F body) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  const auto start = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

std::uint64_t fnv1a_file(const std::filesystem::path& p, std::uint64_t h) {
  std::ifstream f(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  for (unsigned char c : p.filename().string() + '\0' + bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t checksum_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : files) h = fnv1a_file(f, h);
  return h;
}

}  // namespace

CriterionResult exact_matches_brute_force() {
  return timed(1, "exact estimator matches brute-force enumeration", [](CriterionResult& r) {
    double worst = 0.0;
    for (std::size_t g = 0; g < 50; ++g) {
      const std::size_t players = 2 + g % 11;
      const std::size_t t_len = 1 + (g * 5) % 8;
      auto oracle = build_toy_oracle(pairwise_game(players, t_len, 1000 + g, 1 + g % 2));
      const auto& part = oracle->partition();
      const auto exact = estimate_exact(*oracle, part);
      const auto brute = brute_force_shapley(*oracle, part);
      worst = std::max(worst, max_abs_diff(exact, brute));
    }
    r.passed = worst <= 1e-10;
    r.detail = "50 games, max |diff| = " + sci(worst) + " (tol 1e-10)";
  });
}

CriterionResult shapley_axioms() {
  return timed(2, "Shapley axioms (efficiency, null player, symmetry, linearity)",
               [](CriterionResult& r) {
    bool ok = true;
    std::ostringstream detail;

    // Efficiency.
    double eff = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto oracle = build_toy_oracle(pairwise_game(9, 4, 200 + seed));
      const auto m = estimate_exact(*oracle, oracle->partition());
      for (std::size_t t = 0; t < m.t_len(); ++t) {
        double sum = 0.0;
        for (std::size_t p = 0; p < m.n_players(); ++p) sum += m.at(p, t);
        eff = std::max(eff, std::abs(sum - (m.full[t] - m.baseline[t])));
      }
    }
    ok = ok && eff <= 1e-9;
    detail << "efficiency " << sci(eff);

    // Null players.
    auto spec = pairwise_game(8, 3, 77);
    spec.null_players = {1, 6};
    auto null_oracle = build_toy_oracle(spec);
    const auto& part = null_oracle->partition();
    double null_exact = 0.0, null_perm = 0.0, null_samp = 0.0;
    const auto me = estimate_exact(*null_oracle, part);
    const auto mp = estimate_permutation(*null_oracle, part, config_for(Method::Permutation, 500, 3));
    const auto ms = estimate_sampling(*null_oracle, part, config_for(Method::Sampling, 500, 3));
    for (std::size_t p : spec.null_players) {
      for (std::size_t t = 0; t < 3; ++t) {
        null_exact = std::max(null_exact, std::abs(me.at(p, t)));
        null_perm = std::max(null_perm, std::abs(mp.at(p, t)));
        null_samp = std::max(null_samp, std::abs(ms.at(p, t)));
      }
    }
    ok = ok && null_exact == 0.0 && null_perm == 0.0 && null_samp <= 1e-12;
    detail << ", null exact/perm/sampling " << sci(null_exact) << "/" << sci(null_perm) << "/"
           << sci(null_samp);

    // Symmetry: players 0 and 3 enter the game only through their sum.
    auto base = build_toy_oracle(pairwise_game(7, 2, 91));
    FunctionOracle sym(2, [&](const CoalitionMask& m) {
      CoalitionMask rest = m;
      rest.set(0, false);
      rest.set(3, false);
      TokenScores s = base->score(rest);
      const double both = (m.test(0) ? 1.0 : 0.0) + (m.test(3) ? 1.0 : 0.0);
      for (std::size_t t = 0; t < s.size(); ++t) {
        s[t] += 0.4 * both - 0.3 * both * both * (t + 1) + (m.test(5) ? 0.2 * both : 0.0);
      }
      return s;
    });
    const auto msym = estimate_exact(sym, base->partition());
    double sym_diff = 0.0;
    for (std::size_t t = 0; t < 2; ++t) sym_diff = std::max(sym_diff, std::abs(msym.at(0, t) - msym.at(3, t)));
    ok = ok && sym_diff <= 1e-9;
    detail << ", symmetry " << sci(sym_diff);

    // Linearity.
    auto f = build_toy_oracle(pairwise_game(8, 3, 5));
    auto g = build_toy_oracle(pairwise_game(8, 3, 6));
    const double a = 1.7, b = -0.6;
    FunctionOracle combo(3, [&](const CoalitionMask& m) {
      TokenScores x = f->score(m);
      const TokenScores y = g->score(m);
      for (std::size_t t = 0; t < x.size(); ++t) x[t] = a * x[t] + b * y[t];
      return x;
    });
    const auto mf = estimate_exact(*f, f->partition());
    const auto mg = estimate_exact(*g, g->partition());
    const auto mc = estimate_exact(combo, f->partition());
    double lin = 0.0;
    for (std::size_t i = 0; i < mc.values().size(); ++i) {
      lin = std::max(lin, std::abs(mc.values()[i] - (a * mf.values()[i] + b * mg.values()[i])));
    }
    ok = ok && lin <= 1e-9;
    detail << ", linearity " << sci(lin);

    r.passed = ok;
    r.detail = detail.str();
  });
}

CriterionResult estimator_convergence(std::ostream* info) {
  return timed(3, "permutation and sampling estimators converge to exact", [info](CriterionResult& r) {
    // Antithetic permutations are exact on games of degree <= 2, so the
    // quadratic game alone would not exercise convergence; the log-sigmoid
    // of it has interactions of every order.
    auto quadratic = build_toy_oracle(pairwise_game(12, 3, 4242));
    FunctionOracle logistic(3, [&](const CoalitionMask& m) {
      TokenScores z = quadratic->score(m);
      for (double& v : z) v = -std::log1p(std::exp(-v));
      return z;
    });
    const auto& part = quadratic->partition();

    struct Outcome {
      double perm_err, samp_err, range, perm_var, samp_var;
    };
    auto study = [&](ScoringOracle& oracle, std::size_t seeds) {
      const auto exact = estimate_exact(oracle, part);
      const auto [lo, hi] = std::minmax_element(exact.values().begin(), exact.values().end());
      auto seed_mean = [&](Method method) {
        std::vector<double> mean(exact.values().size(), 0.0), sq(mean.size(), 0.0);
        for (std::size_t s = 0; s < seeds; ++s) {
          const auto m = estimate(oracle, part, config_for(method, 2000, 9000 + s));
          for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] += m.values()[i] / static_cast<double>(seeds);
            sq[i] += m.values()[i] * m.values()[i] / static_cast<double>(seeds);
          }
        }
        double worst = 0.0, var = 0.0;
        for (std::size_t i = 0; i < mean.size(); ++i) {
          worst = std::max(worst, std::abs(mean[i] - exact.values()[i]));
          var += std::max(0.0, sq[i] - mean[i] * mean[i]) / static_cast<double>(mean.size());
        }
        return std::pair{worst, var};
      };
      const auto [pe, pv] = seed_mean(Method::Permutation);
      const auto [se, sv] = seed_mean(Method::Sampling);
      return Outcome{pe, se, *hi - *lo, pv, sv};
    };

    bool ok = true;
    std::ostringstream d;
    const std::pair<const char*, ScoringOracle*> games[] = {{"quadratic", quadratic.get()},
                                                            {"log-sigmoid", &logistic}};
    for (const auto& [name, oracle] : games) {
      const Outcome o = study(*oracle, 20);
      ok = ok && o.perm_err <= 0.01 * o.range && o.samp_err <= 0.02 * o.range;
      d << (d.tellp() > 0 ? "; " : "") << name << ": permutation " << sci(o.perm_err) << " (tol "
        << sci(0.01 * o.range) << "), sampling " << sci(o.samp_err) << " (tol "
        << sci(0.02 * o.range) << ")";
      if (info) {
        const Outcome b = study(*oracle, 50);
        *info << "INFO [3] " << name << " game, M=2000, 50 seeds: mean per-entry variance permutation "
              << sci(b.perm_var) << ", sampling " << sci(b.samp_var) << "\n";
      }
    }
    r.passed = ok;
    r.detail = d.str();
  });
}

CriterionResult snr_modality_shift() {
  return timed(4, "audio share rises with SNR in the SNR-mixture game", [](CriterionResult& r) {
    const std::vector<double> grid{-10, -5, 0, 5, 10, std::numeric_limits<double>::infinity()};
    bool monotone = true;
    double worst_closed = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      ToyGameSpec spec;
      spec.kind = ToyKind::SnrMixture;
      spec.partition = FeaturePartition(5, 5);
      spec.t_len = 4;
      spec.seed = seed;
      std::vector<double> a;
      for (double snr : grid) {
        spec.snr_db = snr;
        auto oracle = build_toy_oracle(spec);
        a.push_back(global_shap(estimate_exact(*oracle, spec.partition)).a_shap);
      }
      for (std::size_t i = 0; i + 1 < a.size(); ++i) monotone = monotone && a[i] <= a[i + 1];

      spec.snr_db = std::numeric_limits<double>::infinity();
      auto clean = build_toy_oracle(spec);
      double audio_mass = 0.0, video_mass = 0.0;
      for (std::size_t p = 0; p < spec.partition.n_players(); ++p) {
        for (std::size_t t = 0; t < spec.t_len; ++t) {
          const double w = std::abs(clean->weight(p, t));
          (spec.partition.modality_of_player(p) == Modality::Audio ? audio_mass : video_mass) += w;
        }
      }
      const double expected = 0.5 * audio_mass / (0.5 * audio_mass + video_mass);
      worst_closed = std::max(worst_closed, std::abs(a[2] - expected));
    }
    r.passed = monotone && worst_closed <= 0.05;
    r.detail = std::string("non-decreasing for all 10 seeds: ") + (monotone ? "yes" : "no") +
               ", max |A-SHAP(0 dB) - closed form| = " + sci(worst_closed) + " (tol 0.05)";
  });
}

CriterionResult metric_identities() {
  return timed(5, "metric identities", [](CriterionResult& r) {
    double sum_err = 0.0, w1_err = 0.0, recomb_err = 0.0, row_err = 0.0, scale_err = 0.0;
    std::vector<ShapleyMatrix> matrices;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      auto oracle = build_toy_oracle(pairwise_game(8, 7, 300 + seed));
      matrices.push_back(estimate_exact(*oracle, oracle->partition()));
      matrices.push_back(estimate_permutation(*oracle, oracle->partition(),
                                              config_for(Method::Permutation, 600, seed)));
    }
    for (const auto& m : matrices) {
      const auto g = global_shap(m);
      sum_err = std::max(sum_err, std::abs(g.a_shap + g.v_shap - 1.0));
      const auto g1 = generative_shap(m, 1);
      w1_err = std::max(w1_err, std::abs(g1.a_shap[0] - g.a_shap));
      for (std::size_t w : {2, 3, 7}) {
        const auto gw = generative_shap(m, w);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < gw.size(); ++i) {
          num += gw.a_shap[i] * gw.mass[i];
          den += gw.mass[i];
        }
        recomb_err = std::max(recomb_err, std::abs(num / den - g.a_shap));
      }
      for (Modality mod : {Modality::Audio, Modality::Video}) {
        for (std::size_t k = 1; k <= 4; ++k) {
          for (std::size_t w = 1; w <= 7; ++w) {
            const auto al = alignment_shap(m, mod, k, w);
            for (std::size_t i = 0; i < al.k(); ++i) {
              if (!al.row_defined[i]) continue;
              double s = 0.0;
              for (double x : al.h[i]) s += x;
              row_err = std::max(row_err, std::abs(s - 1.0));
            }
          }
        }
      }
      const auto m3 = scaled(m, 3.0);
      const auto g3 = global_shap(m3);
      scale_err = std::max(scale_err, std::abs(g3.a_shap - g.a_shap));
      const auto gen = generative_shap(m, 3), gen3 = generative_shap(m3, 3);
      for (std::size_t i = 0; i < gen.size(); ++i) {
        scale_err = std::max(scale_err, std::abs(gen.a_shap[i] - gen3.a_shap[i]));
      }
      const auto al = alignment_shap(m, Modality::Audio, 3, 3);
      const auto al3 = alignment_shap(m3, Modality::Audio, 3, 3);
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          scale_err = std::max(scale_err, std::abs(al.h[i][j] - al3.h[i][j]));
        }
      }
      if (al.diagonal_score && al3.diagonal_score) {
        scale_err = std::max(scale_err, std::abs(*al.diagonal_score - *al3.diagonal_score));
      }
    }
    r.passed = sum_err <= 1e-9 && w1_err <= 1e-12 && recomb_err <= 1e-9 && row_err <= 1e-9 &&
               scale_err <= 1e-12;
    r.detail = "a+v " + sci(sum_err) + ", W=1 " + sci(w1_err) + ", recombination " +
               sci(recomb_err) + ", H rows " + sci(row_err) + ", scale " + sci(scale_err);
  });
}

CriterionResult temporal_alignment_shape() {
  return timed(6, "block-diagonal game aligns, uniform game does not", [](CriterionResult& r) {
    ToyGameSpec spec;
    spec.kind = ToyKind::BlockDiagonal;
    spec.partition = FeaturePartition(10, 10);
    spec.t_len = 10;
    spec.blocks = 10;
    spec.seed = 21;
    auto oracle = build_toy_oracle(spec);
    const auto m = estimate_exact(*oracle, spec.partition);
    double id_err = 0.0, off_mass = 0.0;
    bool infinite = true;
    for (Modality mod : {Modality::Audio, Modality::Video}) {
      const auto al = alignment_shap(m, mod, 10, 10);
      for (std::size_t k = 0; k < 10; ++k) {
        for (std::size_t w = 0; w < 10; ++w) {
          id_err = std::max(id_err, std::abs(al.h[k][w] - (k == w ? 1.0 : 0.0)));
          if (k != w) off_mass += al.h[k][w];
        }
      }
      infinite = infinite && al.diagonal_score && std::isinf(*al.diagonal_score);
    }

    ToyGameSpec uni;
    uni.kind = ToyKind::Additive;
    uni.partition = FeaturePartition(4, 4);
    uni.t_len = 8;
    uni.weights.assign(8, std::vector<double>(8, 0.25));
    auto uni_oracle = build_toy_oracle(uni);
    const auto mu = estimate_exact(*uni_oracle, uni.partition);
    double uni_err = 0.0;
    for (Modality mod : {Modality::Audio, Modality::Video}) {
      const auto al = alignment_shap(mu, mod, 4, 4);
      uni_err = std::max(uni_err, al.diagonal_score ? std::abs(*al.diagonal_score - 1.0) : 1.0);
    }
    r.passed = id_err <= 1e-9 && off_mass <= 1e-9 && infinite && uni_err <= 1e-9;
    r.detail = "|H - I| " + sci(id_err) + ", off-diagonal mass " + sci(off_mass) +
               ", uniform diagonal score error " + sci(uni_err);
  });
}

CriterionResult report_determinism(const std::filesystem::path& scratch_dir) {
  return timed(7, "byte-identical reports across runs and pool sizes", [&](CriterionResult& r) {
    const std::string text = R"(
[run]
analyses = ["global", "generative", "alignment", "ablation"]
formats = ["csv", "json"]

[estimator]
method = "permutation"
budget = 400
seed = 11

[generative]
windows = 3

[alignment]
feature_bins = 2
token_bins = 3

[toy]
kind = "snr_mixture"
n_audio = 4
n_video = 4
t_len = 6

[utterance]
noise_type = "babble"

[sweep]
snr_db = [-10, -5, 0, 5, 10, inf]
seeds = [1, 2, 3]
)";
    RunConfig config = parse_run_config(parse_kv(text));
    std::vector<std::uint64_t> sums;
    int run_no = 0;
    for (std::size_t workers : {1, 8, 1}) {
      config.workers = workers;
      config.out_dir = scratch_dir / ("determinism-" + std::to_string(run_no++));
      std::filesystem::remove_all(config.out_dir);
      run_and_write(config, RunMode::Sweep, nullptr);
      sums.push_back(checksum_dir(config.out_dir));
    }
    r.passed = sums[0] == sums[1] && sums[1] == sums[2];
    std::ostringstream d;
    d << std::hex << "checksums " << sums[0] << " (pool 1), " << sums[1] << " (pool 8), "
      << sums[2] << " (pool 1 again)";
    r.detail = d.str();
  });
}

std::vector<CriterionResult> run_all(const Options& options) {
  std::filesystem::path scratch = options.scratch_dir;
  if (scratch.empty()) scratch = std::filesystem::temp_directory_path() / "avshap-selftest";
  std::filesystem::create_directories(scratch);
  return {exact_matches_brute_force(), shapley_axioms(),      estimator_convergence(options.info),
          snr_modality_shift(),        metric_identities(),   temporal_alignment_shape(),
          report_determinism(scratch)};
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << " (" << r.detail << ", "
    << std::fixed << std::setprecision(2) << r.seconds << " s)";
  return s.str();
}

}  // namespace avshap::selftest
