#include "doctest.h"

#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "avshap/error.hpp"
#include "avshap/keyvalue.hpp"

using namespace avshap;

TEST_CASE("scalars, strings, arrays and comments") {
  const auto doc = parse_kv(R"(
# leading comment
[run]
analyses = ["global", "alignment"]   # trailing comment
workers = 4
ratio = -2.5e-3
flag = true
name = "a \"quoted\" # not a comment"

[sweep]
snr_db = [
  -10, -5,   # noisy end
  0, inf,
]
nested = [[1, 2], [3.5, -inf]]
)");
  CHECK(doc.find("run", "workers")->as_int("w") == 4);
  CHECK(doc.find("run", "ratio")->as_double("r") == -2.5e-3);
  CHECK(doc.find("run", "flag")->as_bool("f"));
  CHECK(doc.find("run", "name")->as_string("n") == "a \"quoted\" # not a comment");
  CHECK(doc.find("run", "analyses")->as_string_vector("a") == std::vector<std::string>{"global", "alignment"});
  const auto snr = doc.find("sweep", "snr_db")->as_double_vector("s");
  REQUIRE(snr.size() == 4);
  CHECK(std::isinf(snr[3]));
  const auto& nested = doc.find("sweep", "nested")->as_array("n");
  CHECK(nested[1].as_double_vector("x")[1] == -std::numeric_limits<double>::infinity());
  CHECK(doc.find("run", "missing") == nullptr);
  CHECK(doc.find("nope", "x") == nullptr);
}

TEST_CASE("integers widen to doubles, not the other way") {
  const auto doc = parse_kv("[a]\ni = 3\nd = 3.0\n");
  CHECK(doc.find("a", "i")->as_double("i") == 3.0);
  CHECK_THROWS_AS(doc.find("a", "d")->as_int("d"), ConfigError);
  CHECK_THROWS_AS(doc.find("a", "i")->as_string("i"), ConfigError);
}

TEST_CASE("syntax errors carry line numbers") {
  auto fails_at = [](const char* text, const char* needle) {
    try {
      parse_kv(text);
    } catch (const ConfigError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_at("[a]\nx = 1\nx = 2\n", "line 3"));
  CHECK(fails_at("[a]\nx 1\n", "line 2"));
  CHECK(fails_at("[a\n", "line 1"));
  CHECK(fails_at("[a]\ns = \"open\n", "line 2"));
  CHECK(fails_at("[a]\nv = [1, 2\n", "line"));
  CHECK(fails_at("[a]\nv = 1.2.3\n", "line 2"));
}

TEST_CASE("unreadable file is a config error") {
  CHECK_THROWS_AS(load_kv_file("/nonexistent/dir/run.toml"), ConfigError);
}

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t bits = rng();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    if (!std::isfinite(d)) continue;
    const std::string text = format_double(d);
    double back = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), back);
    CHECK(back == d);
  }
}

TEST_CASE("documents round-trip through text") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    KvDocument doc;
    const std::size_t n_sections = 1 + rng() % 3;
    for (std::size_t s = 0; s < n_sections; ++s) {
      const std::string sec = "sec" + std::to_string(s);
      doc.add_section(sec);
      for (std::size_t k = 0; k < 1 + rng() % 5; ++k) {
        const std::string key = "k" + std::to_string(k);
        switch (rng() % 5) {
          case 0: doc.set(sec, key, static_cast<std::int64_t>(rng()) / 3); break;
          case 1: doc.set(sec, key, std::ldexp(static_cast<double>(rng() % 100000) - 5e4, -(int)(rng() % 20))); break;
          case 2: doc.set(sec, key, std::string("v\"al#") + std::to_string(rng() % 100)); break;
          case 3: doc.set(sec, key, rng() % 2 == 0); break;
          default: {
            KvValue::Array a;
            for (std::size_t i = 0; i < rng() % 4; ++i) a.emplace_back(static_cast<double>(i) / 3.0);
            a.emplace_back(KvValue::Array{KvValue(1), KvValue("x")});
            doc.set(sec, key, KvValue(std::move(a)));
          }
        }
      }
    }
    const auto back = parse_kv(doc.to_text());
    CHECK(back.sections() == doc.sections());
  }
}
