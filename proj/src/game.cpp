#include "avshap/game.hpp"

#include <algorithm>

#include "avshap/error.hpp"

namespace avshap {

std::string_view to_string(Modality m) {
  return m == Modality::Audio ? "audio" : "video";
}

Modality parse_modality(std::string_view text) {
  if (text == "audio" || text == "a" || text == "A") return Modality::Audio;
  if (text == "video" || text == "v" || text == "V") return Modality::Video;
  throw PartitionError("unknown modality '" + std::string(text) + "' (expected audio or video)");
}

std::vector<IndexRange> split_contiguous(std::size_t n, std::size_t parts) {
  if (parts == 0 || parts > n) {
    throw MetricError("cannot split " + std::to_string(n) + " items into " +
                      std::to_string(parts) + " nonempty parts");
  }
  std::vector<IndexRange> out;
  out.reserve(parts);
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    out.push_back({begin, begin + len});
    begin += len;
  }
  return out;
}

FeaturePartition::FeaturePartition(std::size_t n_audio, std::size_t n_video,
                                   std::size_t audio_group_size,
                                   std::size_t video_group_size)
    : n_audio_(n_audio),
      n_video_(n_video),
      audio_group_(audio_group_size),
      video_group_(video_group_size) {
  if (audio_group_ == 0 || video_group_ == 0) {
    throw PartitionError("group sizes must be at least 1");
  }
  if (n_audio_ + n_video_ == 0) {
    throw PartitionError("empty game: partition has no feature slots");
  }
  if (n_audio_ % audio_group_ != 0) {
    throw PartitionError("audio slot count " + std::to_string(n_audio_) +
                         " is not divisible by audio group size " +
                         std::to_string(audio_group_));
  }
  if (n_video_ % video_group_ != 0) {
    throw PartitionError("video slot count " + std::to_string(n_video_) +
                         " is not divisible by video group size " +
                         std::to_string(video_group_));
  }
}

FeaturePartition make_partition(std::size_t n_audio, std::size_t n_video,
                                std::size_t audio_group_size,
                                std::size_t video_group_size) {
  return FeaturePartition(n_audio, n_video, audio_group_size, video_group_size);
}

std::size_t FeaturePartition::player_of_slot(std::size_t slot) const {
  if (slot >= n_slots()) throw PartitionError("slot index out of range");
  if (slot < n_audio_) return slot / audio_group_;
  return n_audio_players() + (slot - n_audio_) / video_group_;
}

IndexRange FeaturePartition::slots_of_player(std::size_t player) const {
  if (player >= n_players()) throw PartitionError("player index out of range");
  if (player < n_audio_players()) {
    return {player * audio_group_, (player + 1) * audio_group_};
  }
  const std::size_t v = player - n_audio_players();
  return {n_audio_ + v * video_group_, n_audio_ + (v + 1) * video_group_};
}

Modality FeaturePartition::modality_of_player(std::size_t player) const {
  if (player >= n_players()) throw PartitionError("player index out of range");
  return player < n_audio_players() ? Modality::Audio : Modality::Video;
}

IndexRange FeaturePartition::players(Modality m) const {
  if (m == Modality::Audio) return {0, n_audio_players()};
  return {n_audio_players(), n_players()};
}

CoalitionMask::CoalitionMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) {
    if (b > 1) throw PartitionError("mask bits must be 0 or 1");
  }
}

std::size_t CoalitionMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string CoalitionMask::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

std::vector<std::uint8_t> expand_mask(const FeaturePartition& partition,
                                      const CoalitionMask& mask) {
  if (mask.size() != partition.n_players()) {
    throw PartitionError("mask has " + std::to_string(mask.size()) + " bits, partition has " +
                         std::to_string(partition.n_players()) + " players");
  }
  std::vector<std::uint8_t> slots(partition.n_slots(), 0);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask.test(p)) continue;
    const auto r = partition.slots_of_player(p);
    std::fill(slots.begin() + static_cast<std::ptrdiff_t>(r.begin),
              slots.begin() + static_cast<std::ptrdiff_t>(r.end), std::uint8_t{1});
  }
  return slots;
}

std::vector<TokenScores> ScoringOracle::score_batch(std::span<const CoalitionMask> masks) {
  std::vector<TokenScores> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(score(m));
  return out;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::Permutation: return "permutation";
    case Method::Sampling: return "sampling";
    case Method::BruteForce: return "brute_force";
  }
  return "unknown";
}

ShapleyMatrix::ShapleyMatrix(FeaturePartition partition, std::size_t t_len, Method method)
    : partition_(std::move(partition)),
      t_len_(t_len),
      method_(method),
      values_(partition_.n_players() * t_len, 0.0) {
  if (t_len_ == 0) throw PartitionError("Shapley matrix needs at least one token");
}

}  // namespace avshap
