#include "avshap/bridge.hpp"

#include <algorithm>
#include <cmath>

#include "avshap/error.hpp"

namespace avshap {

using nlohmann::json;

namespace {

bool looks_non_finite(const std::string& line) {
  return line.find("NaN") != std::string::npos || line.find("Infinity") != std::string::npos;
}

std::uint64_t reply_id(const json& j, const std::string& peer) {
  if (!j.contains("id") || !j.at("id").is_number_unsigned()) {
    throw BridgeError("reply from " + peer + " carries no response id");
  }
  return j.at("id").get<std::uint64_t>();
}

}  // namespace

void BridgeConfig::validate() const {
  if (handshake_timeout_ms <= 0 || call_timeout_ms <= 0) {
    throw ConfigError("bridge timeouts must be positive");
  }
  if (max_batch == 0) throw ConfigError("bridge max_batch must be at least 1");
  if (const auto* s = std::get_if<StdioEndpoint>(&transport); s && s->command.empty()) {
    throw ConfigError("stdio bridge needs a command");
  }
  if (const auto* t = std::get_if<TcpEndpoint>(&transport); t && (t->host.empty() || t->port == 0)) {
    throw ConfigError("tcp bridge needs a host and a nonzero port");
  }
}

std::unique_ptr<LineTransport> open_transport(const BridgeConfig& config) {
  config.validate();
  if (const auto* s = std::get_if<StdioEndpoint>(&config.transport)) {
    return std::make_unique<ChildProcessTransport>(s->command, s->args);
  }
  const auto& t = std::get<TcpEndpoint>(config.transport);
  return std::make_unique<TcpTransport>(t.host, t.port,
                                        std::chrono::milliseconds(config.handshake_timeout_ms));
}

BridgeClient::BridgeClient(std::unique_ptr<LineTransport> transport, BridgeConfig config)
    : transport_(std::move(transport)), config_(std::move(config)) {
  config_.validate();
}

std::unique_ptr<BridgeClient> BridgeClient::connect(const BridgeConfig& config) {
  return std::make_unique<BridgeClient>(open_transport(config), config);
}

const std::vector<UtteranceManifest>& BridgeClient::handshake() {
  transport_->send_line(encode_hello());
  const auto line = transport_->read_line(std::chrono::milliseconds(config_.handshake_timeout_ms));
  if (!line) {
    throw BridgeError("handshake with " + transport_->describe() + " timed out after " +
                      std::to_string(config_.handshake_timeout_ms) + " ms");
  }
  json j;
  try {
    j = json::parse(*line);
  } catch (const json::exception& e) {
    throw BridgeError("malformed handshake reply from " + transport_->describe() + ": " + e.what());
  }
  const std::string type = j.value("type", std::string());
  if (type == "error") {
    throw BridgeError("adapter refused handshake: " + j.value("message", std::string()));
  }
  if (type != "hello_ok") throw BridgeError("expected hello_ok, got '" + type + "'");
  if (!j.contains("version") || !j.at("version").is_number_integer()) {
    throw BridgeError("hello_ok carries no protocol version");
  }
  const int version = j.at("version").get<int>();
  if (version != kProtocolVersion) {
    throw BridgeError("protocol version mismatch: adapter speaks " + std::to_string(version) +
                      ", client speaks " + std::to_string(kProtocolVersion));
  }
  if (!j.contains("manifests") || !j.at("manifests").is_array()) {
    throw BridgeError("hello_ok carries no manifest list");
  }
  manifests_.clear();
  std::set<std::string> seen;
  for (const auto& m : j.at("manifests")) {
    manifests_.push_back(manifest_from_json(m));
    if (!seen.insert(manifests_.back().utterance_id).second) {
      throw BridgeError("duplicate utterance id '" + manifests_.back().utterance_id + "'");
    }
  }
  ready_ = true;
  return manifests_;
}

const UtteranceManifest& BridgeClient::manifest(const std::string& utterance_id) const {
  for (const auto& m : manifests_) {
    if (m.utterance_id == utterance_id) return m;
  }
  throw BridgeError("adapter has no utterance '" + utterance_id + "'");
}

std::vector<TokenScores> BridgeClient::remote_score(const std::string& utterance_id,
                                                    std::span<const CoalitionMask> masks) {
  if (!ready_) throw BridgeError("remote_score before handshake");
  if (masks.size() > config_.max_batch) {
    throw BridgeError("batch of " + std::to_string(masks.size()) + " masks exceeds max_batch " +
                      std::to_string(config_.max_batch));
  }
  const auto& m = manifest(utterance_id);
  const std::size_t n_players = m.partition().n_players();
  for (const auto& mask : masks) {
    if (mask.size() != n_players) {
      throw PartitionError("mask length " + std::to_string(mask.size()) + " != " +
                           std::to_string(n_players) + " players of '" + utterance_id + "'");
    }
  }
  const std::string peer = transport_->describe();

  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::uint64_t id = next_id_++;
    transport_->send_line(encode_score(id, utterance_id, masks));
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(config_.call_timeout_ms);
    while (true) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      const auto line = left.count() > 0 ? transport_->read_line(left) : std::nullopt;
      if (!line) break;  // timeout

      json j;
      try {
        j = json::parse(*line);
      } catch (const json::exception& e) {
        if (looks_non_finite(*line)) {
          throw ScoreError("adapter returned non-finite log-probabilities for '" + utterance_id +
                           "' (request " + std::to_string(id) + ")");
        }
        throw BridgeError("malformed reply from " + peer + ": " + e.what());
      }
      const std::uint64_t rid = reply_id(j, peer);
      if (abandoned_.erase(rid) > 0) continue;  // late reply to a timed-out request
      if (rid != id) {
        throw BridgeError("out-of-order reply from " + peer + ": expected id " +
                          std::to_string(id) + ", got " + std::to_string(rid));
      }
      const std::string type = j.value("type", std::string());
      if (type == "error") {
        throw ScoreError("adapter error for '" + utterance_id + "': " +
                         j.value("message", std::string("(no message)")));
      }
      if (type != "score_ok") throw BridgeError("unexpected reply type '" + type + "' from " + peer);
      if (!j.contains("logprobs") || !j.at("logprobs").is_array()) {
        throw BridgeError("score_ok without logprobs from " + peer);
      }
      const auto& lp = j.at("logprobs");
      if (lp.size() != masks.size()) {
        throw BridgeError("score_ok for request " + std::to_string(id) + " carries " +
                          std::to_string(lp.size()) + " vectors for " +
                          std::to_string(masks.size()) + " masks");
      }
      std::vector<TokenScores> out;
      out.reserve(lp.size());
      for (std::size_t i = 0; i < lp.size(); ++i) {
        const auto& row = lp[i];
        if (!row.is_array() || row.size() != m.t_len) {
          throw ScoreError("adapter returned a score vector of the wrong length for '" +
                           utterance_id + "' mask " + masks[i].to_string());
        }
        TokenScores s;
        s.reserve(row.size());
        for (const auto& v : row) {
          if (!v.is_number() || !std::isfinite(v.get<double>())) {
            throw ScoreError("adapter returned a non-finite log-probability for '" + utterance_id +
                             "' mask " + masks[i].to_string());
          }
          s.push_back(v.get<double>());
        }
        out.push_back(std::move(s));
      }
      return out;
    }
    abandoned_.insert(id);
  }
  throw ScoreError("scoring '" + utterance_id + "' on " + peer + " timed out twice after " +
                   std::to_string(config_.call_timeout_ms) + " ms");
}

BridgedOracle::BridgedOracle(BridgeClient& client, const std::string& utterance_id)
    : client_(client), manifest_(client.manifest(utterance_id)) {}

TokenScores BridgedOracle::score(const CoalitionMask& mask) {
  return std::move(client_.remote_score(manifest_.utterance_id,
                                        std::span<const CoalitionMask>(&mask, 1))
                       .front());
}

std::vector<TokenScores> BridgedOracle::score_batch(std::span<const CoalitionMask> masks) {
  std::vector<TokenScores> out;
  out.reserve(masks.size());
  const std::size_t step = client_.config().max_batch;
  for (std::size_t i = 0; i < masks.size(); i += step) {
    auto part = client_.remote_score(manifest_.utterance_id,
                                     masks.subspan(i, std::min(step, masks.size() - i)));
    for (auto& s : part) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace avshap
