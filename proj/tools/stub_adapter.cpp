// Reference scorer for the bridge: serves the toy games described by a
// config file ([toy], [utterance], [sweep]) over the line protocol, on stdin/
// stdout or on a TCP port. Scores are exactly what the in-process toy oracle
// computes, so bridged and in-process runs can be compared bit for bit.
//
// --fault injects misbehaviour for client tests:
//   nan        one NaN per score vector
//   error      error reply to every score request
//   hang-first sleep --hang-ms before answering the first score request
//   hang-all   sleep before every score reply
//   wrong-id   answer with an id the client never sent
//   short      drop the last token of each vector

#include <atomic>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "CLI11.hpp"
#include "avshap/error.hpp"
#include "avshap/keyvalue.hpp"
#include "avshap/protocol.hpp"
#include "avshap/run_config.hpp"
#include "avshap/transport.hpp"

using nlohmann::json;

namespace {

struct Options {
  std::string config;
  int listen_port = -1;
  int reply_version = avshap::kProtocolVersion;
  std::string fault;
  std::string fault_utterance;
  int hang_ms = 1000;
};

class Stub {
 public:
  Stub(const Options& opt, std::vector<avshap::ToyUtterance> utterances) : opt_(opt) {
    for (auto& u : utterances) {
      manifests_.push_back(u.manifest);
      oracles_.emplace(u.manifest.utterance_id, avshap::ToyOracle(u.spec));
    }
  }

  // One reply line per request line.
  std::string handle(const std::string& line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      return avshap::encode_error(std::nullopt, std::string("malformed request: ") + e.what());
    }
    std::optional<std::uint64_t> id;
    if (j.is_object() && j.contains("id") && j.at("id").is_number_unsigned()) {
      id = j.at("id").get<std::uint64_t>();
    }
    try {
      if (!j.is_object()) throw std::runtime_error("request is not an object");
      const std::string type = j.value("type", std::string());
      if (type == "hello") return avshap::encode_hello_ok(manifests_, opt_.reply_version);
      if (type == "score") return score(j, id);
      throw std::runtime_error("unknown request type '" + type + "'");
    } catch (const std::exception& e) {
      return avshap::encode_error(id, e.what());
    }
  }

 private:
  std::string score(const json& j, std::optional<std::uint64_t> id) {
    if (!id) throw std::runtime_error("score request without id");
    const std::string utt = j.value("utterance", std::string());
    const auto it = oracles_.find(utt);
    if (it == oracles_.end()) throw std::runtime_error("unknown utterance '" + utt + "'");
    if (!j.contains("masks") || !j.at("masks").is_array()) throw std::runtime_error("score request without masks");

    const bool faulty = opt_.fault_utterance.empty() || opt_.fault_utterance == utt;
    const std::string fault = faulty ? opt_.fault : "";
    if (fault == "hang-all" || (fault == "hang-first" && !hung_.exchange(true))) {
      std::this_thread::sleep_for(std::chrono::milliseconds(opt_.hang_ms));
    }
    if (fault == "error") throw std::runtime_error("injected scorer failure");

    const std::size_t n_players = it->second.partition().n_players();
    std::vector<avshap::TokenScores> out;
    for (const auto& m : j.at("masks")) {
      if (!m.is_array() || m.size() != n_players) {
        throw std::runtime_error("mask length " + std::to_string(m.is_array() ? m.size() : 0) +
                                 " does not match the expected length " + std::to_string(n_players));
      }
      avshap::CoalitionMask mask(n_players);
      for (std::size_t p = 0; p < n_players; ++p) {
        const int bit = m[p].is_number_integer() ? m[p].get<int>() : -1;
        if (bit != 0 && bit != 1) throw std::runtime_error("mask entries must be 0 or 1");
        mask.set(p, bit == 1);
      }
      std::lock_guard<std::mutex> lock(mu_);
      out.push_back(it->second.score(mask));
    }
    if (fault == "short") {
      for (auto& s : out) s.pop_back();
    }
    if (fault == "wrong-id") return avshap::encode_score_ok(*id + 1000, out);
    std::string reply = avshap::encode_score_ok(*id, out);
    if (fault == "nan") {
      // What a Python json.dumps of float('nan') puts on the wire.
      const auto pos = reply.find("[[");
      if (pos != std::string::npos) reply.insert(pos + 2, "NaN,");
    }
    return reply;
  }

  const Options& opt_;
  std::vector<avshap::UtteranceManifest> manifests_;
  std::map<std::string, avshap::ToyOracle> oracles_;
  std::atomic<bool> hung_{false};
  std::mutex mu_;
};

int serve_stdio(Stub& stub) {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::cout << stub.handle(line) << '\n' << std::flush;
  }
  return 0;
}

void serve_connection(Stub& stub, int fd) {
  avshap::FdLineChannel ch;
  ch.reset(fd, fd, true);
  const std::string peer = "client fd " + std::to_string(fd);
  try {
    while (true) {
      const auto line = ch.read_line(std::chrono::hours(24), peer);
      if (!line) continue;
      if (line->empty()) continue;
      ch.send_line(stub.handle(*line), peer);
    }
  } catch (const avshap::BridgeError&) {
    // peer went away
  }
}

int serve_tcp(Stub& stub, int port) {
  const int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) {
    std::perror("socket");
    return 1;
  }
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(lfd, 16) < 0) {
    std::perror("bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
  // Port 0 picks a free port; tell whoever started us which one.
  std::cout << "listening " << ntohs(addr.sin_port) << '\n' << std::flush;
  while (true) {
    const int fd = ::accept(lfd, nullptr, nullptr);
    if (fd < 0) continue;
    std::thread(serve_connection, std::ref(stub), fd).detach();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toy-game scorer speaking the avshap bridge protocol"};
  Options opt;
  app.add_option("--config", opt.config, "file with [toy] / [utterance] / [sweep] sections")->required();
  app.add_option("--listen", opt.listen_port, "serve TCP on this loopback port instead of stdio (0 = any)");
  app.add_option("--reply-version", opt.reply_version, "protocol version to claim in hello_ok");
  app.add_option("--fault", opt.fault, "inject a fault")
      ->check(CLI::IsMember({"nan", "error", "hang-first", "hang-all", "wrong-id", "short"}));
  app.add_option("--fault-utterance", opt.fault_utterance, "only misbehave for this utterance");
  app.add_option("--hang-ms", opt.hang_ms, "delay used by the hang faults");
  CLI11_PARSE(app, argc, argv);

  try {
    Stub stub(opt, avshap::toy_utterances(avshap::load_kv_file(opt.config), true));
    return opt.listen_port >= 0 ? serve_tcp(stub, opt.listen_port) : serve_stdio(stub);
  } catch (const avshap::Error& e) {
    std::cerr << "stub_adapter: " << e.what() << "\n";
    return 2;
  }
}
