#include "doctest.h"

#include <cmath>

#include "avshap/bridge.hpp"
#include "avshap/error.hpp"
#include "avshap/estimators.hpp"
#include "avshap/run_config.hpp"
#include "test_support.hpp"

#include <netinet/in.h>
#include <sys/socket.h>

using namespace avshap;
using nlohmann::json;

namespace {

const char* kStub = AVSHAP_STUB_ADAPTER;

const char* kGames = R"(
[toy]
kind = "pairwise_interaction"
n_audio = 8
n_video = 4
audio_group_size = 2
t_len = 5
seed = 31

[utterance]
id = "utt"
noise_type = "babble"
tokens = ["the", "cat", "sat", "on", "it"]
)";

const char* kGrid = R"(
[toy]
kind = "snr_mixture"
n_audio = 3
n_video = 3
t_len = 4

[utterance]
id = "grid"

[sweep]
snr_db = [-5, 0, inf]
seeds = [1, 2]
)";

BridgeConfig stub_config(const std::string& games, std::vector<std::string> extra = {},
                         int call_timeout_ms = 5000) {
  BridgeConfig c;
  std::vector<std::string> args{"--config", games};
  args.insert(args.end(), extra.begin(), extra.end());
  c.transport = StdioEndpoint{kStub, args};
  c.call_timeout_ms = call_timeout_ms;
  c.handshake_timeout_ms = 5000;
  c.max_batch = 16;
  return c;
}

std::unique_ptr<BridgeClient> connected(const BridgeConfig& c) {
  auto client = BridgeClient::connect(c);
  client->handshake();
  return client;
}

ToyGameSpec local_spec(const std::string& games, const std::string& id) {
  for (auto& u : toy_utterances(load_kv_file(games), true)) {
    if (u.manifest.utterance_id == id) return u.spec;
  }
  throw std::runtime_error("no such utterance");
}

std::uint16_t closed_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
  socklen_t len = sizeof a;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
  ::close(fd);
  return ntohs(a.sin_port);
}

}  // namespace

TEST_CASE("handshake returns the declared manifest") {
  testutil::TempDir dir;
  auto client = connected(stub_config(dir.write("g.toml", kGames)));
  const auto& ms = client->manifests();
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].utterance_id == "utt");
  CHECK(ms[0].t_len == 5);
  CHECK(ms[0].partition().n_players() == 8);
  CHECK(ms[0].audio_group_size == 2);
  CHECK(ms[0].tokens[2] == "sat");
  CHECK(ms[0].tags.at("noise_type") == "babble");
  CHECK_THROWS_AS(client->manifest("other"), BridgeError);
}

TEST_CASE("sweep grids become one manifest per grid point") {
  testutil::TempDir dir;
  auto client = connected(stub_config(dir.write("g.toml", kGrid)));
  REQUIRE(client->manifests().size() == 6);
  CHECK(client->manifests()[0].utterance_id == "grid-0");
  CHECK(client->manifests()[5].tags.at("snr_db") == "inf");
}

TEST_CASE("version mismatch is fatal") {
  testutil::TempDir dir;
  auto client = BridgeClient::connect(stub_config(dir.write("g.toml", kGames), {"--reply-version", "2"}));
  try {
    client->handshake();
    FAIL("expected BridgeError");
  } catch (const BridgeError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("unreachable endpoints fail before any traffic") {
  BridgeConfig tcp;
  tcp.transport = TcpEndpoint{"127.0.0.1", closed_port()};
  tcp.handshake_timeout_ms = 2000;
  CHECK_THROWS_AS(BridgeClient::connect(tcp), BridgeError);

  BridgeConfig missing;
  missing.transport = StdioEndpoint{"/nonexistent/scorer", {}};
  CHECK_THROWS_AS(connected(missing), BridgeError);
}

TEST_CASE("scores come back bit-exact") {
  testutil::TempDir dir;
  const auto games = dir.write("g.toml", kGames);
  auto client = connected(stub_config(games));
  ToyOracle local(local_spec(games, "utt"));
  BridgedOracle remote(*client, "utt");
  const auto full = CoalitionMask::full(8), empty = CoalitionMask::empty(8);
  CHECK(remote.score(full) == local.score(full));
  const std::vector<CoalitionMask> batch{empty, full};
  const auto both = remote.score_batch(batch);
  REQUIRE(both.size() == 2);
  CHECK(both[0] == local.score(empty));
  CHECK(both[1] == local.score(full));
}

TEST_CASE("ids increase and large batches are split") {
  testutil::TempDir dir;
  auto client = connected(stub_config(dir.write("g.toml", kGames)));
  BridgedOracle remote(*client, "utt");
  std::vector<CoalitionMask> masks(40, CoalitionMask::full(8));
  CHECK(remote.score_batch(masks).size() == 40);
  CHECK(client->requests_sent() == 3);
  CHECK_THROWS_AS(client->remote_score("utt", masks), BridgeError);
  CHECK_THROWS_AS(remote.score(CoalitionMask::full(7)), PartitionError);
}

TEST_CASE("bridged and in-process estimates agree") {
  testutil::TempDir dir;
  const auto games = dir.write("g.toml", kGames);
  auto client = connected(stub_config(games));
  ToyOracle local(local_spec(games, "utt"));
  BridgedOracle remote(*client, "utt");
  const FeaturePartition part = client->manifest("utt").partition();
  for (Method method : {Method::Exact, Method::Permutation, Method::Sampling}) {
    EstimatorConfig c;
    c.method = method;
    c.budget_m = 500;
    c.seed = 77;
    c.batch_size = 32;
    const auto a = estimate(local, part, c);
    const auto b = estimate(remote, part, c);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    }
    CHECK(worst <= 1e-9);
    CHECK(a.evaluations == b.evaluations);
  }
}

TEST_CASE("utterance-level failures are score errors") {
  testutil::TempDir dir;
  const auto games = dir.write("g.toml", kGames);
  const auto full = CoalitionMask::full(8);
  SUBCASE("NaN on the wire") {
    auto client = connected(stub_config(games, {"--fault", "nan"}));
    CHECK_THROWS_AS(BridgedOracle(*client, "utt").score(full), ScoreError);
  }
  SUBCASE("error reply") {
    auto client = connected(stub_config(games, {"--fault", "error"}));
    try {
      BridgedOracle(*client, "utt").score(full);
      FAIL("expected ScoreError");
    } catch (const ScoreError& e) {
      CHECK(std::string(e.what()).find("injected") != std::string::npos);
    }
  }
  SUBCASE("short vector") {
    auto client = connected(stub_config(games, {"--fault", "short"}));
    CHECK_THROWS_AS(BridgedOracle(*client, "utt").score(full), ScoreError);
  }
  SUBCASE("two timeouts") {
    auto client = connected(stub_config(games, {"--fault", "hang-all", "--hang-ms", "400"}, 100));
    CHECK_THROWS_AS(BridgedOracle(*client, "utt").score(full), ScoreError);
  }
}

TEST_CASE("a wrong reply id is a protocol violation") {
  testutil::TempDir dir;
  auto client = connected(stub_config(dir.write("g.toml", kGames), {"--fault", "wrong-id"}));
  CHECK_THROWS_AS(BridgedOracle(*client, "utt").score(CoalitionMask::full(8)), BridgeError);
}

TEST_CASE("one timeout is retried and the late reply discarded") {
  testutil::TempDir dir;
  const auto games = dir.write("g.toml", kGames);
  auto client = connected(stub_config(games, {"--fault", "hang-first", "--hang-ms", "700"}, 500));
  ToyOracle local(local_spec(games, "utt"));
  BridgedOracle remote(*client, "utt");
  auto m = CoalitionMask::full(8);
  CHECK(remote.score(m) == local.score(m));
  CHECK(client->requests_sent() == 2);
  m.set(3, false);
  CHECK(remote.score(m) == local.score(m));
  CHECK(client->requests_sent() == 3);
}

TEST_CASE("adapter validates requests and keeps serving") {
  testutil::TempDir dir;
  ChildProcessTransport t(kStub, {"--config", dir.write("g.toml", kGames)});
  const auto ask = [&](const std::string& line) {
    t.send_line(line);
    const auto reply = t.read_line(std::chrono::milliseconds(5000));
    REQUIRE(reply);
    return json::parse(*reply);
  };
  auto r = ask(R"({"type":"score","id":4,"utterance":"utt","masks":[[1,1,1]]})");
  CHECK(r["type"] == "error");
  CHECK(r["id"] == 4);
  CHECK(r["message"].get<std::string>().find("expected length 8") != std::string::npos);

  r = ask(R"({"type":"score","id":5,"utterance":"utt",)");
  CHECK(r["type"] == "error");
  CHECK_FALSE(r.contains("id"));

  r = ask(R"({"type":"dance","id":6})");
  CHECK(r["type"] == "error");
  CHECK(r["id"] == 6);

  const std::string req = R"({"type":"score","id":7,"utterance":"utt","masks":[[1,0,1,0,1,0,1,1]]})";
  t.send_line(req);
  const auto first = t.read_line(std::chrono::milliseconds(5000));
  t.send_line(req);
  const auto second = t.read_line(std::chrono::milliseconds(5000));
  REQUIRE(first);
  CHECK(first == second);
  CHECK(json::parse(*first)["type"] == "score_ok");
}

TEST_CASE("TCP transport against a listening adapter") {
  testutil::TempDir dir;
  const auto games = dir.write("g.toml", kGames);
  ChildProcessTransport server(kStub, {"--config", games, "--listen", "0"});
  const auto banner = server.read_line(std::chrono::milliseconds(5000));
  REQUIRE(banner);
  REQUIRE(banner->rfind("listening ", 0) == 0);
  BridgeConfig c;
  c.transport = TcpEndpoint{"127.0.0.1", static_cast<std::uint16_t>(std::stoi(banner->substr(10)))};
  auto a = connected(c);
  auto b = connected(c);
  ToyOracle local(local_spec(games, "utt"));
  const auto m = CoalitionMask::full(8);
  CHECK(BridgedOracle(*a, "utt").score(m) == local.score(m));
  CHECK(BridgedOracle(*b, "utt").score(m) == local.score(m));
}

TEST_CASE("protocol encoding") {
  const auto hello = json::parse(encode_hello());
  CHECK(hello["type"] == "hello");
  CHECK(hello["version"] == 1);
  const std::vector<CoalitionMask> masks{CoalitionMask::full(2)};
  const auto score = json::parse(encode_score(9, "u", masks));
  CHECK(score["masks"] == json::array({json::array({1, 1})}));
  const auto ok = encode_score_ok(9, {{0.1, -1e-300, -123.456}});
  const auto back = json::parse(ok)["logprobs"][0];
  CHECK(back[0].get<double>() == 0.1);
  CHECK(back[1].get<double>() == -1e-300);
  CHECK(ok.find("0.1,") != std::string::npos);

  UtteranceManifest m;
  m.utterance_id = "x";
  m.n_audio = 4;
  m.n_video = 2;
  m.audio_group_size = 2;
  m.t_len = 2;
  m.tokens = {"a", "b"};
  m.tags = {{"snr_db", "5"}};
  CHECK(manifest_from_json(manifest_to_json(m)) == m);
  m.tokens = {"a"};
  CHECK_THROWS_AS(m.validate(), BridgeError);
}
