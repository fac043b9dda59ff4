#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace testing;

namespace {

const std::string kEditHead = std::string(kEditHeader) + "\n";
const std::string kRegHead = std::string(kRegistrationHeader) + "\n";

std::string edit_line(EditorId id, Timestamp ts) { return std::to_string(id) + "\t" + std::to_string(ts) + "\t0\t1\t5\t0\t\t0\t1\n"; }

}  // namespace

TEST_CASE("parse_log: empty edit file keeps registration-only editors", "[editlog]") {
  const auto hs = parse_log(kEditHead, kRegHead + "1\t100\n2\t100\n3\t100\n", true);
  REQUIRE(hs.size() == 3);
  for (const auto& h : hs) CHECK(h.edits.empty());
}

TEST_CASE("parse_log: edits are sorted by timestamp", "[editlog]") {
  const auto hs = parse_log(kEditHead + edit_line(7, 200) + edit_line(7, 100), kRegHead + "7\t50\n", true);
  REQUIRE(hs.size() == 1);
  REQUIRE(hs[0].edits.size() == 2);
  CHECK(hs[0].edits[0].timestamp == 100);
  CHECK(hs[0].edits[1].timestamp == 200);
}

TEST_CASE("parse_log: malformed lines name their line number", "[editlog]") {
  const auto regs = kRegHead + "7\t50\n";
  try {
    parse_log(kEditHead + edit_line(7, 100) + "7\tabc\t0\t1\t5\t0\t\t0\t1\n", regs, true);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_log(kEditHead + "7\t100\t0\n", regs, true), ParseError);
  CHECK_THROWS_AS(parse_log(kEditHead + "7\t100\t0\t1\t5\t2\t\t0\t1\n", regs, true), ParseError);
  CHECK_THROWS_AS(parse_log(kEditHead + "7\t100\t0\t1\t5\t0\t9\t0\t1\n", regs, true), ParseError);
}

TEST_CASE("parse_log: integrity errors", "[editlog]") {
  CHECK_THROWS_AS(parse_log(kEditHead + edit_line(8, 100), kRegHead + "7\t50\n", true), IntegrityError);
  CHECK_THROWS_AS(parse_log(kEditHead, kRegHead + "7\t50\n7\t60\n", true), IntegrityError);
  CHECK_THROWS_AS(parse_log(kEditHead + edit_line(7, 40), kRegHead + "7\t50\n", true), IntegrityError);
}

TEST_CASE("window_count examples", "[editlog]") {
  const CutoffConfig cfg;
  CHECK(window_count(history(1, 500, {}), cfg, 0, 5) == 0);
  CHECK(window_count(history(1, 500, {-1}), cfg, 0, 5) == 1);
  // 10, 40 and 170 days back: the first two fall in the last 150 days, the
  // third in [cutoff - 300d, cutoff - 150d).
  const auto h = history(1, 500, {-10 * kDay, -40 * kDay, -170 * kDay});
  CHECK(window_count(h, cfg, 0, 5) == 2);
  CHECK(window_count(h, cfg, 5, 10) == 1);
  // an edit exactly at the cutoff belongs to no backward window
  CHECK(window_count(history(1, 500, {0}), cfg, 0, 5) == 0);
  CHECK_THROWS_AS(window_count(h, cfg, 5, 5), ArgumentError);
  CHECK_THROWS_AS(window_count(h, cfg, 6, 5), ArgumentError);
  CHECK_THROWS_AS(window_count(h, cfg, -1, 5), ArgumentError);
}

TEST_CASE("window boundaries follow 30-day months", "[editlog]") {
  const CutoffConfig cfg;
  const Timestamp L = 30 * kDay;
  // month 0 is [cutoff - L, cutoff): closed below, open above
  const auto h = history(1, 500, {-L - 1, -L, -L + 1});
  CHECK(window_count(h, cfg, 0, 1) == 2);
  CHECK(window_count(h, cfg, 1, 2) == 1);
}

TEST_CASE("unique_edit_days examples", "[editlog]") {
  const CutoffConfig cfg;
  std::vector<Timestamp> same_day;
  for (int i = 0; i < 10; ++i) same_day.push_back(-20 * kDay + i * 60);
  CHECK(unique_edit_days(history(1, 500, same_day), cfg, 0, 5) == 1);
  CHECK(unique_edit_days(history(1, 500, {}), cfg, 0, 5) == 0);
  // cutoff is a UTC day boundary, so with floor day indices -1.0d, -1.5d and
  // -3.0d land on three different days; two edits within one day collapse
  REQUIRE(kCutoff % kDay == 0);
  CHECK(unique_edit_days(history(1, 500, {-kDay, -3 * kDay / 2, -3 * kDay}), cfg, 0, 5) == 3);
  CHECK(unique_edit_days(history(1, 500, {-kDay / 2, -kDay / 4, -3 * kDay}), cfg, 0, 5) == 2);
}

TEST_CASE("target_edits examples", "[editlog]") {
  const CutoffConfig cfg;
  CHECK(target_edits(history(1, 500, {-5}), cfg) == 0);
  CHECK(target_edits(history(1, 500, {0}), cfg) == 1);
  CHECK(target_edits(history(1, 500, {10 * kDay, 149 * kDay, 151 * kDay}), cfg) == 2);
  CHECK(target_edits(history(1, 500, {150 * kDay}), cfg) == 0);
}

TEST_CASE("day_index floors toward negative infinity", "[editlog]") {
  CHECK(day_index(0) == 0);
  CHECK(day_index(kDay - 1) == 0);
  CHECK(day_index(kDay) == 1);
  CHECK(day_index(-1) == -1);
}

TEST_CASE("window invariants on random histories", "[editlog][property]") {
  auto rng = make_rng(11, "editlog.property");
  const CutoffConfig cfg;
  for (int trial = 0; trial < 300; ++trial) {
    const auto h = random_history(rng, trial + 1);
    validate(h);
    for (int k = 1; k <= 12; ++k) {
      // additivity over any split point
      for (int s = 1; s < k; ++s) {
        REQUIRE(window_count(h, cfg, 0, s) + window_count(h, cfg, s, k) == window_count(h, cfg, 0, k));
      }
      for (int a = 0; a < k; ++a) REQUIRE(unique_edit_days(h, cfg, a, k) <= window_count(h, cfg, a, k));
    }
    // no edit in both a backward window and the target window
    for (const auto& e : h.edits) {
      const bool back = e.timestamp >= cfg.cutoff_ts - 24 * cfg.month_len && e.timestamp < cfg.cutoff_ts;
      const bool fwd = e.timestamp >= cfg.cutoff_ts && e.timestamp < cfg.cutoff_ts + 5 * cfg.month_len;
      REQUIRE_FALSE((back && fwd));
    }
    std::int64_t fwd = 0;
    for (const auto& e : h.edits) fwd += (e.timestamp >= cfg.cutoff_ts && e.timestamp < cfg.cutoff_ts + 5 * cfg.month_len);
    REQUIRE(target_edits(h, cfg) == fwd);
  }
}

TEST_CASE("serialize then parse is the identity", "[editlog][property]") {
  auto rng = make_rng(12, "editlog.roundtrip");
  std::vector<EditorHistory> hs;
  for (int i = 0; i < 200; ++i) hs.push_back(random_history(rng, 10 + i * 3));
  const auto back = parse_log(serialize_edits(hs, true), serialize_registrations(hs, true), true);
  REQUIRE(back == hs);
  const auto no_header = parse_log(serialize_edits(hs, false), serialize_registrations(hs, false), false);
  REQUIRE(no_header == hs);
}

TEST_CASE("gzip files round-trip by extension", "[editlog][io]") {
  auto rng = make_rng(13, "editlog.gzip");
  std::vector<EditorHistory> hs;
  for (int i = 0; i < 50; ++i) hs.push_back(random_history(rng, i + 1));
  const auto dir = scratch_dir("editlog_gz");
  io::write_file_atomic(dir / "edits.tsv.gz", serialize_edits(hs, true));
  io::write_file_atomic(dir / "regs.tsv.gz", serialize_registrations(hs, true));
  const auto back = parse_log(io::read_file(dir / "edits.tsv.gz"), io::read_file(dir / "regs.tsv.gz"), true);
  CHECK(back == hs);
  CHECK(io::read_file(dir / "edits.tsv.gz") == serialize_edits(hs, true));
  CHECK_THROWS_AS(io::read_file(dir / "missing.tsv"), ArgumentError);
}

TEST_CASE("validate rejects broken histories", "[editlog]") {
  auto h = history(3, 100, {-5 * kDay, -2 * kDay});
  validate(h);
  auto wrong_owner = h;
  wrong_owner.edits[0].editor_id = 4;
  CHECK_THROWS_AS(validate(wrong_owner), IntegrityError);
  auto unsorted = h;
  std::swap(unsorted.edits[0], unsorted.edits[1]);
  CHECK_THROWS_AS(validate(unsorted), IntegrityError);
  auto early = h;
  early.registration_ts = h.edits[0].timestamp + 1;
  CHECK_THROWS_AS(validate(early), IntegrityError);
  auto orphan_revert = h;
  orphan_revert.edits[0].reverted_by = 9;
  CHECK_THROWS_AS(validate(orphan_revert), IntegrityError);
}

TEST_CASE("sha256 digest of a known string", "[io]") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
