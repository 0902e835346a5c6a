#include "doctest.h"

#include "avshap/error.hpp"
#include "avshap/game.hpp"

using namespace avshap;

TEST_CASE("unit groups number audio players first") {
  const auto p = make_partition(4, 4, 1, 1);
  CHECK(p.n_players() == 8);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p.modality_of_player(i) == Modality::Audio);
  for (std::size_t i = 4; i < 8; ++i) CHECK(p.modality_of_player(i) == Modality::Video);
  CHECK(p.players(Modality::Video) == IndexRange{4, 8});
}

TEST_CASE("paired audio slots share one player") {
  const auto p = make_partition(8, 4, 2, 1);
  CHECK(p.n_players() == 8);
  CHECK(p.n_audio_players() == 4);
  CHECK(p.slots_of_player(0) == IndexRange{0, 2});
  CHECK(p.slots_of_player(3) == IndexRange{6, 8});
  CHECK(p.slots_of_player(4) == IndexRange{8, 9});
  CHECK(p.player_of_slot(5) == 2);
  CHECK(p.player_of_slot(11) == 7);
}

TEST_CASE("partition rejects ragged groups and empty inputs") {
  CHECK_THROWS_AS(make_partition(5, 4, 2, 1), PartitionError);
  CHECK_THROWS_AS(make_partition(4, 3, 1, 2), PartitionError);
  CHECK_THROWS_AS(make_partition(0, 0, 1, 1), PartitionError);
  CHECK_THROWS_AS(make_partition(4, 4, 0, 1), PartitionError);
  try {
    make_partition(5, 4, 2, 1);
  } catch (const PartitionError& e) {
    CHECK(std::string(e.what()).find("audio") != std::string::npos);
  }
}

TEST_CASE("single-modality partitions") {
  const FeaturePartition a(3, 0);
  CHECK(a.n_players() == 3);
  CHECK(a.players(Modality::Video).size() == 0);
  const FeaturePartition v(0, 2);
  CHECK(v.modality_of_player(0) == Modality::Video);
}

TEST_CASE("mask expansion") {
  SUBCASE("full mask keeps every slot") {
    const auto p = make_partition(4, 4, 1, 1);
    const auto s = expand_mask(p, CoalitionMask::full(8));
    CHECK(s == std::vector<std::uint8_t>(8, 1));
  }
  SUBCASE("dropping a paired audio player zeroes both slots") {
    const auto p = make_partition(8, 4, 2, 1);
    auto m = CoalitionMask::full(p.n_players());
    m.set(0, false);
    const auto s = expand_mask(p, m);
    REQUIRE(s.size() == 12);
    CHECK(s[0] == 0);
    CHECK(s[1] == 0);
    for (std::size_t i = 2; i < 12; ++i) CHECK(s[i] == 1);
  }
  SUBCASE("empty mask") {
    const auto p = make_partition(4, 4, 1, 1);
    CHECK(expand_mask(p, CoalitionMask::empty(8)) == std::vector<std::uint8_t>(8, 0));
  }
  SUBCASE("wrong length") {
    CHECK_THROWS_AS(expand_mask(make_partition(4, 4, 1, 1), CoalitionMask::full(7)), PartitionError);
  }
}

TEST_CASE("coalition mask basics") {
  CoalitionMask m(5);
  CHECK(m.none());
  m.set(1, true);
  m.set(4, true);
  CHECK(m.count() == 2);
  CHECK(m.test(4));
  CHECK_FALSE(m.test(0));
  CHECK(m.to_string() == "01001");
  CHECK(CoalitionMask::full(3).all());
}

TEST_CASE("contiguous splits give the remainder to the front") {
  const auto r = split_contiguous(7, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0].size() == 3);
  CHECK(r[1].size() == 2);
  CHECK(r[2].size() == 2);
  CHECK(r[2].end == 7);
  CHECK(split_contiguous(5, 5).back() == IndexRange{4, 5});
  CHECK_THROWS_AS(split_contiguous(3, 4), MetricError);
  CHECK_THROWS_AS(split_contiguous(3, 0), MetricError);
}

TEST_CASE("modality names") {
  CHECK(parse_modality("audio") == Modality::Audio);
  CHECK(parse_modality("V") == Modality::Video);
  CHECK(to_string(Modality::Video) == "video");
  CHECK_THROWS(parse_modality("text"));
}
