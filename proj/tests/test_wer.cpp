#include "doctest.h"

#include "avshap/error.hpp"
#include "avshap/wer.hpp"

using namespace avshap;

TEST_CASE("word error rate") {
  CHECK(wer("a b c", "a b c") == 0.0);
  CHECK(wer("a b c", "a x c") == doctest::Approx(1.0 / 3));
  CHECK(wer("the cat sat", "the cat") == doctest::Approx(1.0 / 3));
  CHECK(wer("a", "b c d") == 3.0);
  CHECK(wer("  spaced   out\twords ", "spaced out words") == 0.0);
  CHECK_THROWS_AS(wer("", "a"), MetricError);
  CHECK_THROWS_AS(wer("   ", ""), MetricError);
}

TEST_CASE("edit counts by kind") {
  const auto e = count_edits(split_words("the quick brown fox jumps"), split_words("a quick fox jumps high"));
  CHECK(e.substitutions == 1);
  CHECK(e.deletions == 1);
  CHECK(e.insertions == 1);
  CHECK(e.total() == 3);
  const auto empty_hyp = count_edits(split_words("x y"), {});
  CHECK(empty_hyp.deletions == 2);
}

TEST_CASE("WER is never negative and zero only for equal sequences") {
  const char* words[] = {"a", "b", "c"};
  for (unsigned code = 1; code < 81; ++code) {
    std::vector<std::string> ref, hyp;
    unsigned c = code;
    for (int i = 0; i < 2; ++i, c /= 3) ref.push_back(words[c % 3]);
    for (int i = 0; i < 2; ++i, c /= 3) hyp.push_back(words[c % 3]);
    const double w = wer(ref, hyp);
    CHECK(w >= 0.0);
    CHECK((w == 0.0) == (ref == hyp));
    CHECK(wer(ref, ref) == 0.0);
  }
}
