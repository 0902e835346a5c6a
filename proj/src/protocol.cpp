#include "avshap/protocol.hpp"

#include "avshap/error.hpp"

namespace avshap {

using nlohmann::json;

FeaturePartition UtteranceManifest::partition() const {
  return FeaturePartition(n_audio, n_video, audio_group_size, video_group_size);
}

void UtteranceManifest::validate() const {
  if (utterance_id.empty()) throw BridgeError("manifest has an empty utterance_id");
  try {
    (void)partition();
  } catch (const PartitionError& e) {
    throw BridgeError("manifest '" + utterance_id + "': " + e.what());
  }
  if (t_len == 0) throw BridgeError("manifest '" + utterance_id + "' has t_len = 0");
  if (t_len != tokens.size()) {
    throw BridgeError("manifest '" + utterance_id + "' declares t_len " + std::to_string(t_len) +
                      " but lists " + std::to_string(tokens.size()) + " tokens");
  }
}

json manifest_to_json(const UtteranceManifest& m) {
  return json{{"utterance_id", m.utterance_id},
              {"n_audio", m.n_audio},
              {"n_video", m.n_video},
              {"audio_group_size", m.audio_group_size},
              {"video_group_size", m.video_group_size},
              {"t_len", m.t_len},
              {"tokens", m.tokens},
              {"tags", m.tags}};
}

UtteranceManifest manifest_from_json(const json& j) {
  try {
    UtteranceManifest m;
    m.utterance_id = j.at("utterance_id").get<std::string>();
    m.n_audio = j.at("n_audio").get<std::size_t>();
    m.n_video = j.at("n_video").get<std::size_t>();
    m.audio_group_size = j.value("audio_group_size", std::size_t{1});
    m.video_group_size = j.value("video_group_size", std::size_t{1});
    m.t_len = j.at("t_len").get<std::size_t>();
    m.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("tags")) {
      for (const auto& [k, v] : j.at("tags").items()) {
        m.tags[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw BridgeError(std::string("malformed manifest: ") + e.what());
  }
}

std::string encode_hello(int version) {
  return json{{"type", "hello"}, {"version", version}}.dump();
}

std::string encode_hello_ok(const std::vector<UtteranceManifest>& manifests, int version) {
  json list = json::array();
  for (const auto& m : manifests) list.push_back(manifest_to_json(m));
  return json{{"type", "hello_ok"}, {"version", version}, {"manifests", list}}.dump();
}

std::string encode_score(std::uint64_t id, const std::string& utterance,
                         std::span<const CoalitionMask> masks) {
  json list = json::array();
  for (const auto& m : masks) {
    json bits = json::array();
    for (auto b : m.bits()) bits.push_back(static_cast<int>(b));
    list.push_back(std::move(bits));
  }
  return json{{"type", "score"}, {"id", id}, {"utterance", utterance}, {"masks", list}}.dump();
}

std::string encode_score_ok(std::uint64_t id, const std::vector<TokenScores>& logprobs) {
  return json{{"type", "score_ok"}, {"id", id}, {"logprobs", logprobs}}.dump();
}

std::string encode_error(std::optional<std::uint64_t> id, const std::string& message) {
  json j{{"type", "error"}, {"message", message}};
  if (id) j["id"] = *id;
  return j.dump();
}

}  // namespace avshap
