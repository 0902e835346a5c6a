#pragma once

// Client side of the scorer bridge: drives an adapter process (or TCP
// service) over wire protocol v1 and exposes each of its utterances as a
// ScoringOracle.

#include <chrono>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "avshap/game.hpp"
#include "avshap/protocol.hpp"
#include "avshap/transport.hpp"

namespace avshap {

struct StdioEndpoint {
  std::string command;
  std::vector<std::string> args;
};

struct TcpEndpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

struct BridgeConfig {
  std::variant<StdioEndpoint, TcpEndpoint> transport;
  int handshake_timeout_ms = 10000;
  int call_timeout_ms = 60000;
  std::size_t max_batch = 64;

  void validate() const;
};

// Spawns the child or connects the socket. Throws BridgeError.
std::unique_ptr<LineTransport> open_transport(const BridgeConfig& config);

// One connection, lock-step request/response. Use from a single thread.
class BridgeClient {
 public:
  BridgeClient(std::unique_ptr<LineTransport> transport, BridgeConfig config);

  static std::unique_ptr<BridgeClient> connect(const BridgeConfig& config);

  // Sends hello and returns the adapter's manifests. Throws BridgeError on a
  // timeout, a version other than 1 or a malformed reply.
  const std::vector<UtteranceManifest>& handshake();
  const std::vector<UtteranceManifest>& manifests() const { return manifests_; }
  const UtteranceManifest& manifest(const std::string& utterance_id) const;

  // Score vectors in request order. A timed-out request is retried once
  // under a fresh id; the late reply to the abandoned id is discarded if it
  // ever arrives. Throws ScoreError for utterance-level failures (error
  // reply, non-finite values, two timeouts) and BridgeError for protocol
  // violations.
  std::vector<TokenScores> remote_score(const std::string& utterance_id,
                                        std::span<const CoalitionMask> masks);

  const BridgeConfig& config() const { return config_; }
  std::uint64_t requests_sent() const { return next_id_ - 1; }

 private:
  std::unique_ptr<LineTransport> transport_;
  BridgeConfig config_;
  bool ready_ = false;
  std::vector<UtteranceManifest> manifests_;
  std::uint64_t next_id_ = 1;
  std::set<std::uint64_t> abandoned_;
};

class BridgedOracle final : public ScoringOracle {
 public:
  BridgedOracle(BridgeClient& client, const std::string& utterance_id);

  std::size_t t_len() const override { return manifest_.t_len; }
  TokenScores score(const CoalitionMask& mask) override;
  std::vector<TokenScores> score_batch(std::span<const CoalitionMask> masks) override;

  const UtteranceManifest& manifest() const { return manifest_; }

 private:
  BridgeClient& client_;
  UtteranceManifest manifest_;
};

}  // namespace avshap
