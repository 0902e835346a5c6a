#pragma once

// In-process scoring oracles with known structure, used as verification
// fixtures, plus the brute-force Shapley reference.
//
// Every toy game is a polynomial of degree <= 2 in the presence bits:
//
//   score(C)[t] = bias[t] + sum_{p in C} w[p][t] + sum_{p<q in C} v[p][q][t]
//
// Weights are drawn uniformly from [-1, 1] and biases from [-3, -1] using the
// spec seed, unless given explicitly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avshap/game.hpp"
#include "avshap/keyvalue.hpp"

namespace avshap {

enum class ToyKind { Additive, PairwiseInteraction, BlockDiagonal, SnrMixture };

std::string_view to_string(ToyKind kind);
ToyKind parse_toy_kind(std::string_view text);

struct ToyGameSpec {
  ToyKind kind = ToyKind::Additive;
  FeaturePartition partition{1, 0};
  std::size_t t_len = 1;
  std::uint64_t seed = 0;
  // SnrMixture only. Audio weights are scaled by snr_reliability(snr_db).
  double snr_db = std::numeric_limits<double>::infinity();
  // PairwiseInteraction and BlockDiagonal: interaction weights are drawn
  // from [-scale, scale].
  double interaction_scale = 0.5;
  // BlockDiagonal: token bin j depends only on feature bin j (per modality).
  std::size_t blocks = 1;
  // Optional explicit P x T weights and length-T biases.
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  // Players whose weights and interactions are forced to zero.
  std::vector<std::size_t> null_players;

  void validate() const;
  bool operator==(const ToyGameSpec&) const = default;
};

// snr_lin / (1 + snr_lin) with snr_lin = 10^(snr_db / 10); 1 at +inf.
double snr_reliability(double snr_db);

class ToyOracle final : public ScoringOracle {
 public:
  explicit ToyOracle(ToyGameSpec spec);

  std::size_t t_len() const override { return spec_.t_len; }
  TokenScores score(const CoalitionMask& mask) override;
  bool concurrent_safe() const override { return true; }

  const ToyGameSpec& spec() const { return spec_; }
  const FeaturePartition& partition() const { return spec_.partition; }

  // Effective coefficients after SNR scaling, block restriction and null
  // players.
  double weight(std::size_t player, std::size_t token) const {
    return weights_[player * spec_.t_len + token];
  }
  double bias(std::size_t token) const { return bias_[token]; }

  // Linear games only (Additive, SnrMixture): the Shapley value of player p
  // for token t is its weight.
  std::optional<ShapleyMatrix> closed_form_shapley() const;

 private:
  struct Interaction {
    std::size_t p;
    std::size_t q;
    std::vector<double> value;  // per token
  };

  ToyGameSpec spec_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  std::vector<Interaction> interactions_;
};

std::unique_ptr<ToyOracle> build_toy_oracle(const ToyGameSpec& spec);

// Wraps an arbitrary pure function of the mask.
class FunctionOracle final : public ScoringOracle {
 public:
  using Fn = std::function<TokenScores(const CoalitionMask&)>;

  FunctionOracle(std::size_t t_len, Fn fn) : t_len_(t_len), fn_(std::move(fn)) {}

  std::size_t t_len() const override { return t_len_; }
  TokenScores score(const CoalitionMask& mask) override { return fn_(mask); }
  bool concurrent_safe() const override { return true; }

 private:
  std::size_t t_len_;
  Fn fn_;
};

inline constexpr std::size_t kBruteForceCap = 16;

// Reference Shapley values: for every player, every subset of the other
// players is scored with and without it and weighted by
// |C|! (P-|C|-1)! / P!. Shares no code with the estimators.
ShapleyMatrix brute_force_shapley(ScoringOracle& oracle, const FeaturePartition& partition);

void write_toy_spec(const ToyGameSpec& spec, KvDocument& doc, const std::string& section = "toy");
ToyGameSpec read_toy_spec(const KvDocument& doc, const std::string& section = "toy");

}  // namespace avshap
