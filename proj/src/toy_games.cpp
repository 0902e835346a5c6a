#include "avshap/toy_games.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "avshap/error.hpp"
#include "avshap/rng.hpp"

namespace avshap {
namespace {

// Feature-bin index of every player, bins taken within each modality.
std::vector<std::size_t> player_blocks(const FeaturePartition& part, std::size_t blocks) {
  std::vector<std::size_t> out(part.n_players(), 0);
  for (Modality m : {Modality::Audio, Modality::Video}) {
    const IndexRange players = part.players(m);
    if (players.size() == 0) continue;
    const auto bins = split_contiguous(players.size(), blocks);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      for (std::size_t i = bins[b].begin; i < bins[b].end; ++i) out[players.begin + i] = b;
    }
  }
  return out;
}

std::vector<std::size_t> token_blocks(std::size_t t_len, std::size_t blocks) {
  std::vector<std::size_t> out(t_len, 0);
  const auto bins = split_contiguous(t_len, blocks);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    for (std::size_t t = bins[b].begin; t < bins[b].end; ++t) out[t] = b;
  }
  return out;
}

bool has_interactions(ToyKind k) {
  return k == ToyKind::PairwiseInteraction || k == ToyKind::BlockDiagonal;
}

long double factorial(std::size_t n) {
  long double f = 1.0L;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<long double>(i);
  return f;
}

}  // namespace

std::string_view to_string(ToyKind kind) {
  switch (kind) {
    case ToyKind::Additive: return "additive";
    case ToyKind::PairwiseInteraction: return "pairwise_interaction";
    case ToyKind::BlockDiagonal: return "block_diagonal";
    case ToyKind::SnrMixture: return "snr_mixture";
  }
  return "unknown";
}

ToyKind parse_toy_kind(std::string_view text) {
  for (ToyKind k : {ToyKind::Additive, ToyKind::PairwiseInteraction, ToyKind::BlockDiagonal,
                    ToyKind::SnrMixture}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown toy game kind '" + std::string(text) + "'");
}

double snr_reliability(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 1.0;
  const double lin = std::pow(10.0, snr_db / 10.0);
  return lin / (1.0 + lin);
}

void ToyGameSpec::validate() const {
  const std::size_t n_players = partition.n_players();
  if (t_len == 0) throw ConfigError("toy game needs t_len >= 1");
  if (!weights.empty()) {
    if (weights.size() != n_players) {
      throw ConfigError("toy weights have " + std::to_string(weights.size()) + " rows, expected " +
                        std::to_string(n_players) + " players");
    }
    for (const auto& row : weights) {
      if (row.size() != t_len) {
        throw ConfigError("toy weight row has " + std::to_string(row.size()) +
                          " entries, expected t_len = " + std::to_string(t_len));
      }
      for (double w : row) {
        if (!std::isfinite(w)) throw ConfigError("toy weights must be finite");
      }
    }
  }
  if (!bias.empty()) {
    if (bias.size() != t_len) throw ConfigError("toy bias length must equal t_len");
    for (double b : bias) {
      if (!std::isfinite(b)) throw ConfigError("toy biases must be finite");
    }
  }
  for (std::size_t p : null_players) {
    if (p >= n_players) throw ConfigError("null player index out of range");
  }
  if (kind == ToyKind::SnrMixture) {
    if (std::isnan(snr_db) || snr_db < -10.0) {
      throw ConfigError("snr_db must lie in [-10, +inf]");
    }
  }
  if (has_interactions(kind) && !(std::isfinite(interaction_scale) && interaction_scale >= 0.0)) {
    throw ConfigError("interaction_scale must be finite and non-negative");
  }
  if (kind == ToyKind::BlockDiagonal) {
    if (blocks == 0) throw ConfigError("block_diagonal needs blocks >= 1");
    if (t_len < blocks) throw ConfigError("block_diagonal needs t_len >= blocks");
    for (Modality m : {Modality::Audio, Modality::Video}) {
      const auto n = partition.players(m).size();
      if (n != 0 && n < blocks) {
        throw ConfigError("block_diagonal needs at least `blocks` " + std::string(to_string(m)) +
                          " players");
      }
    }
  }
}

ToyOracle::ToyOracle(ToyGameSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const std::size_t n_players = spec_.partition.n_players();
  const std::size_t t_len = spec_.t_len;

  // Draw order is fixed (weights, biases, interactions) so a seed gives the
  // same base coefficients for every kind and SNR.
  std::mt19937_64 rng(spec_.seed);
  weights_.resize(n_players * t_len);
  for (auto& w : weights_) w = uniform(rng, -1.0, 1.0);
  bias_.resize(t_len);
  for (auto& b : bias_) b = uniform(rng, -3.0, -1.0);

  if (!spec_.weights.empty()) {
    for (std::size_t p = 0; p < n_players; ++p) {
      std::copy(spec_.weights[p].begin(), spec_.weights[p].end(),
                weights_.begin() + static_cast<std::ptrdiff_t>(p * t_len));
    }
  }
  if (!spec_.bias.empty()) bias_ = spec_.bias;

  std::vector<bool> is_null(n_players, false);
  for (std::size_t p : spec_.null_players) is_null[p] = true;

  std::vector<std::size_t> pblock;
  std::vector<std::size_t> tblock;
  if (spec_.kind == ToyKind::BlockDiagonal) {
    pblock = player_blocks(spec_.partition, spec_.blocks);
    tblock = token_blocks(t_len, spec_.blocks);
  }

  if (has_interactions(spec_.kind)) {
    for (std::size_t p = 0; p < n_players; ++p) {
      for (std::size_t q = p + 1; q < n_players; ++q) {
        Interaction ix{p, q, std::vector<double>(t_len)};
        for (auto& v : ix.value) v = uniform(rng, -spec_.interaction_scale, spec_.interaction_scale);
        if (is_null[p] || is_null[q]) continue;
        if (spec_.kind == ToyKind::BlockDiagonal) {
          if (pblock[p] != pblock[q]) continue;
          for (std::size_t t = 0; t < t_len; ++t) {
            if (tblock[t] != pblock[p]) ix.value[t] = 0.0;
          }
        }
        interactions_.push_back(std::move(ix));
      }
    }
  }

  const double r = spec_.kind == ToyKind::SnrMixture ? snr_reliability(spec_.snr_db) : 1.0;
  const IndexRange audio = spec_.partition.players(Modality::Audio);
  for (std::size_t p = 0; p < n_players; ++p) {
    for (std::size_t t = 0; t < t_len; ++t) {
      double& w = weights_[p * t_len + t];
      if (is_null[p]) w = 0.0;
      if (spec_.kind == ToyKind::BlockDiagonal && pblock[p] != tblock[t]) w = 0.0;
      if (spec_.kind == ToyKind::SnrMixture && audio.contains(p)) w *= r;
    }
  }
}

TokenScores ToyOracle::score(const CoalitionMask& mask) {
  const std::size_t n_players = spec_.partition.n_players();
  if (mask.size() != n_players) {
    throw PartitionError("toy oracle expects masks of length " + std::to_string(n_players));
  }
  const std::size_t t_len = spec_.t_len;
  TokenScores out = bias_;
  for (std::size_t p = 0; p < n_players; ++p) {
    if (!mask.test(p)) continue;
    for (std::size_t t = 0; t < t_len; ++t) out[t] += weights_[p * t_len + t];
  }
  for (const auto& ix : interactions_) {
    if (!mask.test(ix.p) || !mask.test(ix.q)) continue;
    for (std::size_t t = 0; t < t_len; ++t) out[t] += ix.value[t];
  }
  return out;
}

std::optional<ShapleyMatrix> ToyOracle::closed_form_shapley() const {
  if (!interactions_.empty() || has_interactions(spec_.kind)) return std::nullopt;
  ShapleyMatrix m(spec_.partition, spec_.t_len, Method::Exact);
  for (std::size_t p = 0; p < spec_.partition.n_players(); ++p) {
    for (std::size_t t = 0; t < spec_.t_len; ++t) m.at(p, t) = weight(p, t);
  }
  return m;
}

std::unique_ptr<ToyOracle> build_toy_oracle(const ToyGameSpec& spec) {
  return std::make_unique<ToyOracle>(spec);
}

ShapleyMatrix brute_force_shapley(ScoringOracle& oracle, const FeaturePartition& partition) {
  const std::size_t n = partition.n_players();
  if (n > kBruteForceCap) {
    throw EstimatorError("brute-force Shapley refuses games with more than " +
                         std::to_string(kBruteForceCap) + " players");
  }
  const std::size_t t_len = oracle.t_len();
  ShapleyMatrix out(partition, t_len, Method::BruteForce);
  const long double n_fact = factorial(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    std::vector<long double> phi(t_len, 0.0L);
    const std::uint64_t n_subsets = std::uint64_t{1} << others.size();
    for (std::uint64_t subset = 0; subset < n_subsets; ++subset) {
      CoalitionMask without(n);
      std::size_t size = 0;
      for (std::size_t k = 0; k < others.size(); ++k) {
        if ((subset >> k) & 1U) {
          without.set(others[k]);
          ++size;
        }
      }
      CoalitionMask with = without;
      with.set(i);
      const TokenScores f_with = oracle.score(with);
      const TokenScores f_without = oracle.score(without);
      if (f_with.size() != t_len || f_without.size() != t_len) {
        throw ScoreError("oracle returned a score vector of the wrong length");
      }
      const long double w = factorial(size) * factorial(n - size - 1) / n_fact;
      for (std::size_t t = 0; t < t_len; ++t) {
        phi[t] += w * (static_cast<long double>(f_with[t]) - static_cast<long double>(f_without[t]));
      }
    }
    for (std::size_t t = 0; t < t_len; ++t) out.at(i, t) = static_cast<double>(phi[t]);
  }
  out.baseline = oracle.score(CoalitionMask::empty(n));
  out.full = oracle.score(CoalitionMask::full(n));
  out.evaluations = n * 2 * static_cast<std::size_t>(std::uint64_t{1} << (n - 1)) + 2;
  return out;
}

void write_toy_spec(const ToyGameSpec& spec, KvDocument& doc, const std::string& section) {
  if (spec.seed > static_cast<std::uint64_t>(INT64_MAX)) {
    throw ConfigError("toy seeds above 2^63 - 1 cannot be written to a config file");
  }
  doc.add_section(section);
  doc.set(section, "kind", std::string(to_string(spec.kind)));
  doc.set(section, "n_audio", static_cast<std::int64_t>(spec.partition.n_audio()));
  doc.set(section, "n_video", static_cast<std::int64_t>(spec.partition.n_video()));
  doc.set(section, "audio_group_size", static_cast<std::int64_t>(spec.partition.audio_group_size()));
  doc.set(section, "video_group_size", static_cast<std::int64_t>(spec.partition.video_group_size()));
  doc.set(section, "t_len", static_cast<std::int64_t>(spec.t_len));
  doc.set(section, "seed", static_cast<std::int64_t>(spec.seed));
  doc.set(section, "snr_db", spec.snr_db);
  doc.set(section, "interaction_scale", spec.interaction_scale);
  doc.set(section, "blocks", static_cast<std::int64_t>(spec.blocks));
  if (!spec.weights.empty()) {
    KvValue::Array rows;
    for (const auto& row : spec.weights) {
      KvValue::Array r;
      for (double w : row) r.emplace_back(w);
      rows.emplace_back(std::move(r));
    }
    doc.set(section, "weights", KvValue(std::move(rows)));
  }
  if (!spec.bias.empty()) {
    KvValue::Array b;
    for (double v : spec.bias) b.emplace_back(v);
    doc.set(section, "bias", KvValue(std::move(b)));
  }
  if (!spec.null_players.empty()) {
    KvValue::Array np;
    for (auto p : spec.null_players) np.emplace_back(static_cast<std::int64_t>(p));
    doc.set(section, "null_players", KvValue(std::move(np)));
  }
}

ToyGameSpec read_toy_spec(const KvDocument& doc, const std::string& section) {
  const auto* table = doc.section(section);
  if (!table) throw ConfigError("missing [" + section + "] section");
  static const std::vector<std::string> known = {
      "kind",   "n_audio",     "n_video", "audio_group_size", "video_group_size", "t_len",
      "seed",   "snr_db",      "interaction_scale", "blocks", "weights", "bias",
      "null_players"};
  for (const auto& [k, v] : *table) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError("unknown key '" + k + "' in [" + section + "]");
    }
  }
  auto get = [&](const std::string& key) { return doc.find(section, key); };
  auto req = [&](const std::string& key) -> const KvValue& {
    const auto* v = get(key);
    if (!v) throw ConfigError("[" + section + "] is missing required key '" + key + "'");
    return *v;
  };
  auto size_or = [&](const std::string& key, std::size_t dflt) -> std::size_t {
    const auto* v = get(key);
    return v ? static_cast<std::size_t>(v->as_uint(section + "." + key)) : dflt;
  };

  ToyGameSpec spec;
  spec.kind = parse_toy_kind(req("kind").as_string(section + ".kind"));
  try {
    spec.partition = FeaturePartition(size_or("n_audio", 0), size_or("n_video", 0),
                                      size_or("audio_group_size", 1),
                                      size_or("video_group_size", 1));
  } catch (const PartitionError& e) {
    throw ConfigError("[" + section + "] " + e.what());
  }
  spec.t_len = static_cast<std::size_t>(req("t_len").as_uint(section + ".t_len"));
  spec.seed = size_or("seed", 0);
  if (const auto* v = get("snr_db")) spec.snr_db = v->as_double(section + ".snr_db");
  if (const auto* v = get("interaction_scale")) {
    spec.interaction_scale = v->as_double(section + ".interaction_scale");
  }
  spec.blocks = size_or("blocks", 1);
  if (const auto* v = get("weights")) {
    for (const auto& row : v->as_array(section + ".weights")) {
      spec.weights.push_back(row.as_double_vector(section + ".weights"));
    }
  }
  if (const auto* v = get("bias")) spec.bias = v->as_double_vector(section + ".bias");
  if (const auto* v = get("null_players")) {
    for (const auto& p : v->as_array(section + ".null_players")) {
      spec.null_players.push_back(static_cast<std::size_t>(p.as_uint(section + ".null_players")));
    }
  }
  spec.validate();
  return spec;
}

}  // namespace avshap
