#include "avshap/estimators.hpp"

#include <bit>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <string>

#include "avshap/error.hpp"
#include "avshap/rng.hpp"

namespace avshap {
namespace {

// Evaluates masks through the oracle in batches, checks every returned
// vector and counts calls. Results always come back in request order.
class MaskEvaluator {
 public:
  MaskEvaluator(ScoringOracle& oracle, const EstimatorConfig& config)
      : oracle_(oracle),
        t_len_(oracle.t_len()),
        batch_size_(config.batch_size),
        workers_(oracle.concurrent_safe() ? config.workers : 1) {}

  std::vector<TokenScores> run(std::span<const CoalitionMask> masks) {
    std::vector<TokenScores> out(masks.size());
    const std::size_t n_batches = (masks.size() + batch_size_ - 1) / batch_size_;
    auto do_batch = [&](std::size_t b) {
      const std::size_t begin = b * batch_size_;
      const std::size_t len = std::min(batch_size_, masks.size() - begin);
      auto slice = masks.subspan(begin, len);
      auto scores = oracle_.score_batch(slice);
      if (scores.size() != len) {
        throw ScoreError("oracle returned " + std::to_string(scores.size()) +
                         " score vectors for a batch of " + std::to_string(len));
      }
      for (std::size_t i = 0; i < len; ++i) {
        check(scores[i], slice[i]);
        out[begin + i] = std::move(scores[i]);
      }
    };
    if (workers_ <= 1 || n_batches <= 1) {
      for (std::size_t b = 0; b < n_batches; ++b) do_batch(b);
    } else {
      for (std::size_t first = 0; first < n_batches; first += workers_) {
        std::vector<std::future<void>> inflight;
        const std::size_t last = std::min(n_batches, first + workers_);
        for (std::size_t b = first; b < last; ++b) {
          inflight.push_back(std::async(std::launch::async, do_batch, b));
        }
        for (auto& f : inflight) f.get();
      }
    }
    evaluations_ += masks.size();
    return out;
  }

  TokenScores run_one(const CoalitionMask& mask) {
    return std::move(run(std::span<const CoalitionMask>(&mask, 1)).front());
  }

  std::size_t t_len() const { return t_len_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  void check(const TokenScores& s, const CoalitionMask& mask) const {
    if (s.size() != t_len_) {
      throw ScoreError("oracle returned " + std::to_string(s.size()) + " scores, expected " +
                       std::to_string(t_len_) + " for mask " + mask.to_string());
    }
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (!std::isfinite(s[t])) {
        throw ScoreError("oracle returned non-finite score at token " + std::to_string(t) +
                         " for mask " + mask.to_string());
      }
    }
  }

  ScoringOracle& oracle_;
  std::size_t t_len_;
  std::size_t batch_size_;
  std::size_t workers_;
  std::size_t evaluations_ = 0;
};

void check_sampled_budget(const FeaturePartition& partition, const EstimatorConfig& config) {
  const std::size_t p = partition.n_players();
  if (config.budget_m < 2 * p) {
    throw EstimatorError("budget " + std::to_string(config.budget_m) +
                         " is below the minimum 2*P = " + std::to_string(2 * p) +
                         " for sampled estimation");
  }
}

void add_delta(std::span<double> acc, const TokenScores& with, const TokenScores& without) {
  for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += with[t] - without[t];
}

std::span<double> row_of(std::vector<double>& flat, std::size_t row, std::size_t width) {
  return std::span<double>(flat).subspan(row * width, width);
}

std::vector<std::size_t> random_order(std::uint64_t seed, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  fisher_yates(rng, std::span<std::size_t>(order));
  return order;
}

constexpr std::size_t kMasksPerChunk = 4096;

}  // namespace

void EstimatorConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (method != Method::Exact && budget_m == 0) throw ConfigError("budget must be positive");
  if (method == Method::BruteForce) throw ConfigError("brute_force is not an estimator method");
}

Method parse_method(std::string_view text) {
  if (text == "exact") return Method::Exact;
  if (text == "permutation") return Method::Permutation;
  if (text == "sampling") return Method::Sampling;
  throw ConfigError("unknown estimator method '" + std::string(text) +
                    "' (expected exact, permutation or sampling)");
}

ShapleyMatrix estimate_exact(ScoringOracle& oracle, const FeaturePartition& partition,
                             const EstimatorConfig& config) {
  config.validate();
  const std::size_t n_players = partition.n_players();
  if (n_players > config.exact_cap) {
    throw EstimatorError("exact estimation over " + std::to_string(n_players) +
                         " players exceeds the cap of " + std::to_string(config.exact_cap) +
                         " (2^P evaluations); use the permutation or sampling method");
  }
  MaskEvaluator eval(oracle, config);
  const std::size_t t_len = eval.t_len();
  const std::uint64_t n_masks = std::uint64_t{1} << n_players;

  // Scores of every coalition, indexed by the coalition's bit pattern.
  std::vector<double> value(n_masks * t_len);
  std::vector<CoalitionMask> chunk;
  for (std::uint64_t first = 0; first < n_masks; first += kMasksPerChunk) {
    const std::uint64_t last = std::min<std::uint64_t>(n_masks, first + kMasksPerChunk);
    chunk.clear();
    for (std::uint64_t s = first; s < last; ++s) {
      CoalitionMask m(n_players);
      for (std::size_t p = 0; p < n_players; ++p) m.set(p, (s >> p) & 1U);
      chunk.push_back(std::move(m));
    }
    auto scores = eval.run(chunk);
    for (std::uint64_t s = first; s < last; ++s) {
      std::copy(scores[s - first].begin(), scores[s - first].end(),
                value.begin() + static_cast<std::ptrdiff_t>(s * t_len));
    }
  }

  // |S|! (P-|S|-1)! / P! = 1 / (P * C(P-1, |S|))
  std::vector<double> weight(n_players);
  double binom = 1.0;
  for (std::size_t s = 0; s < n_players; ++s) {
    weight[s] = 1.0 / (static_cast<double>(n_players) * binom);
    binom = binom * static_cast<double>(n_players - 1 - s) / static_cast<double>(s + 1);
  }

  ShapleyMatrix out(partition, t_len, Method::Exact);
  for (std::size_t p = 0; p < n_players; ++p) {
    const std::uint64_t bit = std::uint64_t{1} << p;
    for (std::uint64_t s = 0; s < n_masks; ++s) {
      if (s & bit) continue;
      const double w = weight[static_cast<std::size_t>(std::popcount(s))];
      const double* with = &value[(s | bit) * t_len];
      const double* without = &value[s * t_len];
      for (std::size_t t = 0; t < t_len; ++t) out.at(p, t) += w * (with[t] - without[t]);
    }
  }
  out.baseline.assign(value.begin(), value.begin() + static_cast<std::ptrdiff_t>(t_len));
  out.full.assign(value.end() - static_cast<std::ptrdiff_t>(t_len), value.end());
  out.evaluations = eval.evaluations();
  return out;
}

ShapleyMatrix estimate_permutation(ScoringOracle& oracle, const FeaturePartition& partition,
                                   const EstimatorConfig& config) {
  config.validate();
  check_sampled_budget(partition, config);
  const std::size_t n_players = partition.n_players();
  MaskEvaluator eval(oracle, config);
  const std::size_t t_len = eval.t_len();

  const auto empty_mask = CoalitionMask::empty(n_players);
  const auto full_mask = CoalitionMask::full(n_players);
  const TokenScores empty = eval.run_one(empty_mask);
  const TokenScores full = eval.run_one(full_mask);

  ShapleyMatrix out(partition, t_len, Method::Permutation);
  out.baseline = empty;
  out.full = full;

  if (n_players == 1) {
    for (std::size_t t = 0; t < t_len; ++t) out.at(0, t) = full[t] - empty[t];
    out.evaluations = eval.evaluations();
    return out;
  }

  const std::size_t per_perm = 2 * (n_players - 1);
  const std::size_t n_perm = config.budget_m / per_perm;
  const std::size_t perms_per_chunk = std::max<std::size_t>(1, kMasksPerChunk / per_perm);

  std::vector<double> sums(n_players * t_len, 0.0);
  std::vector<std::vector<std::size_t>> orders;
  std::vector<CoalitionMask> masks;
  for (std::size_t first = 0; first < n_perm; first += perms_per_chunk) {
    const std::size_t last = std::min(n_perm, first + perms_per_chunk);
    orders.clear();
    masks.clear();
    for (std::size_t k = first; k < last; ++k) {
      orders.push_back(random_order(derive_seed(config.seed, k), n_players));
      const auto& order = orders.back();
      CoalitionMask fwd(n_players);
      for (std::size_t j = 0; j + 1 < n_players; ++j) {
        fwd.set(order[j]);
        masks.push_back(fwd);
      }
      CoalitionMask rev(n_players);
      for (std::size_t j = 0; j + 1 < n_players; ++j) {
        rev.set(order[n_players - 1 - j]);
        masks.push_back(rev);
      }
    }
    const auto scores = eval.run(masks);

    std::size_t idx = 0;
    for (const auto& order : orders) {
      const TokenScores* prev = &empty;
      for (std::size_t j = 0; j < n_players; ++j) {
        const TokenScores* cur = j + 1 < n_players ? &scores[idx++] : &full;
        add_delta(row_of(sums, order[j], t_len), *cur, *prev);
        prev = cur;
      }
      prev = &empty;
      for (std::size_t j = 0; j < n_players; ++j) {
        const TokenScores* cur = j + 1 < n_players ? &scores[idx++] : &full;
        add_delta(row_of(sums, order[n_players - 1 - j], t_len), *cur, *prev);
        prev = cur;
      }
    }
  }

  const double n_samples = 2.0 * static_cast<double>(n_perm);
  for (std::size_t p = 0; p < n_players; ++p) {
    for (std::size_t t = 0; t < t_len; ++t) out.at(p, t) = sums[p * t_len + t] / n_samples;
  }
  out.evaluations = eval.evaluations();
  return out;
}

ShapleyMatrix estimate_sampling(ScoringOracle& oracle, const FeaturePartition& partition,
                                const EstimatorConfig& config) {
  config.validate();
  check_sampled_budget(partition, config);
  const std::size_t n_players = partition.n_players();
  MaskEvaluator eval(oracle, config);
  const std::size_t t_len = eval.t_len();

  const auto empty_mask = CoalitionMask::empty(n_players);
  const auto full_mask = CoalitionMask::full(n_players);
  const TokenScores empty = eval.run_one(empty_mask);
  const TokenScores full = eval.run_one(full_mask);

  ShapleyMatrix out(partition, t_len, Method::Sampling);
  out.baseline = empty;
  out.full = full;

  const std::size_t per_player = config.budget_m / (2 * n_players);
  // Which score each sample's with/without side reads: cached endpoint or
  // position in the evaluated batch.
  constexpr std::size_t kEmpty = SIZE_MAX;
  constexpr std::size_t kFull = SIZE_MAX - 1;
  std::vector<CoalitionMask> masks;
  std::vector<std::pair<std::size_t, std::size_t>> refs;

  for (std::size_t p = 0; p < n_players; ++p) {
    masks.clear();
    refs.clear();
    const std::uint64_t player_seed = derive_seed(config.seed, p);
    for (std::size_t s = 0; s < per_player; ++s) {
      const auto order = random_order(derive_seed(player_seed, s), n_players);
      CoalitionMask without(n_players);
      for (std::size_t q : order) {
        if (q == p) break;
        without.set(q);
      }
      CoalitionMask with = without;
      with.set(p);
      std::pair<std::size_t, std::size_t> ref;
      if (without.none()) {
        ref.second = kEmpty;
      } else {
        ref.second = masks.size();
        masks.push_back(std::move(without));
      }
      if (with.all()) {
        ref.first = kFull;
      } else {
        ref.first = masks.size();
        masks.push_back(std::move(with));
      }
      refs.push_back(ref);
    }
    const auto scores = eval.run(masks);
    auto lookup = [&](std::size_t r) -> const TokenScores& {
      if (r == kEmpty) return empty;
      if (r == kFull) return full;
      return scores[r];
    };
    std::vector<double> acc(t_len, 0.0);
    for (const auto& [w, wo] : refs) add_delta(acc, lookup(w), lookup(wo));
    for (std::size_t t = 0; t < t_len; ++t) {
      out.at(p, t) = acc[t] / static_cast<double>(per_player);
    }
  }
  out.evaluations = eval.evaluations();
  return out;
}

ShapleyMatrix estimate(ScoringOracle& oracle, const FeaturePartition& partition,
                       const EstimatorConfig& config) {
  switch (config.method) {
    case Method::Exact: return estimate_exact(oracle, partition, config);
    case Method::Permutation: return estimate_permutation(oracle, partition, config);
    case Method::Sampling: return estimate_sampling(oracle, partition, config);
    case Method::BruteForce: break;
  }
  throw ConfigError("brute_force is not an estimator method");
}

}  // namespace avshap
