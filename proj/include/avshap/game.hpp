#pragma once

// Cooperative-game primitives shared by the estimators and metrics: the
// assignment of feature slots to players, coalition masks, the scoring-oracle
// contract and the player x token Shapley matrix.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avshap {

enum class Modality { Audio, Video };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view text);

// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

// Splits n items into `parts` contiguous near-equal ranges. The first
// n % parts ranges receive one extra item.
std::vector<IndexRange> split_contiguous(std::size_t n, std::size_t parts);

// Audio slots come first ([0, n_audio)), video slots after. Consecutive
// slots of one modality are grouped into players; one mask element controls
// one player. Audio players are numbered before video players.
class FeaturePartition {
 public:
  FeaturePartition(std::size_t n_audio, std::size_t n_video,
                   std::size_t audio_group_size = 1,
                   std::size_t video_group_size = 1);

  std::size_t n_audio() const { return n_audio_; }
  std::size_t n_video() const { return n_video_; }
  std::size_t n_slots() const { return n_audio_ + n_video_; }
  std::size_t audio_group_size() const { return audio_group_; }
  std::size_t video_group_size() const { return video_group_; }

  std::size_t n_audio_players() const { return n_audio_ / audio_group_; }
  std::size_t n_video_players() const { return n_video_ / video_group_; }
  std::size_t n_players() const { return n_audio_players() + n_video_players(); }

  std::size_t player_of_slot(std::size_t slot) const;
  IndexRange slots_of_player(std::size_t player) const;
  Modality modality_of_player(std::size_t player) const;
  IndexRange players(Modality m) const;

  bool operator==(const FeaturePartition&) const = default;

 private:
  std::size_t n_audio_;
  std::size_t n_video_;
  std::size_t audio_group_;
  std::size_t video_group_;
};

FeaturePartition make_partition(std::size_t n_audio, std::size_t n_video,
                                std::size_t audio_group_size,
                                std::size_t video_group_size);

// Player-level presence bits. 1 keeps a player's slots, 0 zeroes them.
class CoalitionMask {
 public:
  CoalitionMask() = default;
  explicit CoalitionMask(std::size_t n_players, bool present = false)
      : bits_(n_players, present ? 1 : 0) {}
  explicit CoalitionMask(std::vector<std::uint8_t> bits);

  static CoalitionMask full(std::size_t n_players) { return CoalitionMask(n_players, true); }
  static CoalitionMask empty(std::size_t n_players) { return CoalitionMask(n_players, false); }

  std::size_t size() const { return bits_.size(); }
  bool test(std::size_t player) const { return bits_[player] != 0; }
  void set(std::size_t player, bool present = true) { bits_[player] = present ? 1 : 0; }
  std::size_t count() const;
  bool all() const { return count() == size(); }
  bool none() const { return count() == 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::string to_string() const;

  bool operator==(const CoalitionMask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// Slot-level bit vector (length N) for a player-level mask.
std::vector<std::uint8_t> expand_mask(const FeaturePartition& partition,
                                      const CoalitionMask& mask);

using TokenScores = std::vector<double>;

// Maps a coalition mask to the natural-log probabilities of the T fixed
// output tokens (teacher-forced against the full-input decode). Must be
// deterministic. Implementations that can be called from several threads at
// once return true from concurrent_safe(); the estimators serialize calls to
// the others.
class ScoringOracle {
 public:
  virtual ~ScoringOracle() = default;

  virtual std::size_t t_len() const = 0;
  virtual TokenScores score(const CoalitionMask& mask) = 0;
  virtual std::vector<TokenScores> score_batch(std::span<const CoalitionMask> masks);
  virtual bool concurrent_safe() const { return false; }
};

enum class Method { Exact, Permutation, Sampling, BruteForce };

std::string_view to_string(Method m);

// P x T attribution matrix, row-major by player.
class ShapleyMatrix {
 public:
  ShapleyMatrix(FeaturePartition partition, std::size_t t_len, Method method);

  const FeaturePartition& partition() const { return partition_; }
  std::size_t n_players() const { return partition_.n_players(); }
  std::size_t t_len() const { return t_len_; }
  Method method() const { return method_; }

  double at(std::size_t player, std::size_t token) const { return values_[player * t_len_ + token]; }
  double& at(std::size_t player, std::size_t token) { return values_[player * t_len_ + token]; }
  std::span<const double> row(std::size_t player) const {
    return std::span<const double>(values_).subspan(player * t_len_, t_len_);
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  TokenScores baseline;  // f^t(empty)
  TokenScores full;      // f^t(all players)
  std::size_t evaluations = 0;

 private:
  FeaturePartition partition_;
  std::size_t t_len_;
  Method method_;
  std::vector<double> values_;
};

}  // namespace avshap
