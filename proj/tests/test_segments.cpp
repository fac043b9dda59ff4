#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace testing;

namespace {
constexpr SegmentScheme kAll[] = {SegmentScheme::whole, SegmentScheme::join_date3, SegmentScheme::old_new2,
                                  SegmentScheme::activity_days, SegmentScheme::nested7};
}

TEST_CASE("join-date cells and their boundaries", "[segments]") {
  CHECK(assign(0.0, 0, SegmentScheme::join_date3).cell == 0);
  CHECK(assign(149.999, 3, SegmentScheme::join_date3).cell == 0);
  CHECK(assign(150.0, 3, SegmentScheme::join_date3).cell == 1);
  CHECK(assign(359.999, 0, SegmentScheme::join_date3).cell == 1);
  CHECK(assign(360.0, 0, SegmentScheme::join_date3).cell == 2);
  CHECK(assign(3000.0, 40, SegmentScheme::join_date3).cell == 2);
}

TEST_CASE("old/new split at 365 days", "[segments]") {
  CHECK(assign(364.999, 0, SegmentScheme::old_new2).cell == 1);
  CHECK(assign(365.0, 0, SegmentScheme::old_new2).cell == 0);
  // the 360-day join-date boundary and the 365-day old boundary differ
  CHECK(assign(362.0, 0, SegmentScheme::join_date3).cell == 2);
  CHECK(assign(362.0, 0, SegmentScheme::old_new2).cell == 1);
}

TEST_CASE("activity and nested cells", "[segments]") {
  CHECK(assign(10.0, 0, SegmentScheme::activity_days).cell == 0);
  CHECK(assign(10.0, 1, SegmentScheme::activity_days).cell == 1);
  CHECK(assign(10.0, 2, SegmentScheme::activity_days).cell == 1);
  CHECK(assign(10.0, 3, SegmentScheme::activity_days).cell == 2);

  CHECK(assign(400.0, 0, SegmentScheme::nested7).cell == 0);
  CHECK(assign(400.0, 2, SegmentScheme::nested7).cell == 1);
  CHECK(assign(400.0, 11, SegmentScheme::nested7).cell == 2);
  CHECK(assign(100.0, 0, SegmentScheme::nested7).cell == 3);
  CHECK(assign(100.0, 1, SegmentScheme::nested7).cell == 4);
  CHECK(assign(100.0, 3, SegmentScheme::nested7).cell == 5);
  CHECK(assign(100.0, 10, SegmentScheme::nested7).cell == 5);
  CHECK(assign(100.0, 11, SegmentScheme::nested7).cell == 6);
  CHECK(cell_label(SegmentScheme::nested7, 6) == "new/days11+");
}

TEST_CASE("invalid inputs", "[segments]") {
  CHECK_THROWS_AS(assign(-1.0, 0, SegmentScheme::whole), ArgumentError);
  CHECK_THROWS_AS(assign(1.0, -1, SegmentScheme::whole), ArgumentError);
  CHECK_THROWS_AS(parse_scheme("thirds"), ArgumentError);
  for (auto s : kAll) CHECK(parse_scheme(scheme_name(s)) == s);
}

TEST_CASE("every editor lands in exactly one valid cell", "[segments][property]") {
  auto rng = make_rng(5, "segments.property");
  const CutoffConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    const auto h = random_history(rng, i + 1, 60);
    const auto key = segment_key(h, cfg);
    for (auto s : kAll) {
      const auto id = assign(key, s);
      REQUIRE(id.scheme == s);
      REQUIRE(id.cell >= 0);
      REQUIRE(id.cell < cell_count(s));
      REQUIRE(assign(key, s) == id);
    }
    // nested cells refine old/new and the 0 / 1-2 / 3+ activity bands
    const int nested = assign(key, SegmentScheme::nested7).cell;
    REQUIRE((nested < 3) == (assign(key, SegmentScheme::old_new2).cell == 0));
    const int band = assign(key, SegmentScheme::activity_days).cell;
    REQUIRE((nested < 3 ? nested : std::min(nested - 3, 2)) == band);
  }
}
