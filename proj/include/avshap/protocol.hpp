#pragma once

// Wire protocol v1 between the engine and an out-of-process scorer
// ("adapter"): line-delimited JSON, one object per line, UTF-8.
//
//   -> {"type":"hello","version":1}
//   <- {"type":"hello_ok","version":1,"manifests":[{...}, ...]}
//   -> {"type":"score","id":<u64>,"utterance":"<id>","masks":[[0,1,...],...]}
//   <- {"type":"score_ok","id":<u64>,"logprobs":[[...T numbers...],...]}
//   <- {"type":"error","id":<u64>,"message":"..."}
//
// Masks carry player-level bits; the adapter zeroes the slots of absent
// players using the group sizes from the manifest. Doubles are written as the
// shortest decimal that round-trips to the same binary64.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avshap/game.hpp"
#include "json.hpp"

namespace avshap {

inline constexpr int kProtocolVersion = 1;

struct UtteranceManifest {
  std::string utterance_id;
  std::size_t n_audio = 0;
  std::size_t n_video = 0;
  std::size_t audio_group_size = 1;
  std::size_t video_group_size = 1;
  std::size_t t_len = 0;
  std::vector<std::string> tokens;  // display only
  // Free-form condition tags: snr_db, noise_type, duration_s, masking_site,
  // reference, ...
  std::map<std::string, std::string> tags;

  FeaturePartition partition() const;
  // Throws BridgeError if the partition is invalid or t_len != tokens.size().
  void validate() const;
  bool operator==(const UtteranceManifest&) const = default;
};

nlohmann::json manifest_to_json(const UtteranceManifest& m);
UtteranceManifest manifest_from_json(const nlohmann::json& j);

std::string encode_hello(int version = kProtocolVersion);
std::string encode_hello_ok(const std::vector<UtteranceManifest>& manifests,
                            int version = kProtocolVersion);
std::string encode_score(std::uint64_t id, const std::string& utterance,
                         std::span<const CoalitionMask> masks);
std::string encode_score_ok(std::uint64_t id, const std::vector<TokenScores>& logprobs);
std::string encode_error(std::optional<std::uint64_t> id, const std::string& message);

}  // namespace avshap
