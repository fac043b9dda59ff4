#pragma once

// Edit events, editor histories, the TSV wire format and the time-window
// counting primitives every other module is built on.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "editcast/error.hpp"

namespace editcast {

using EditorId = std::int64_t;
using ArticleId = std::int64_t;
using Timestamp = std::int64_t;  // seconds since the Unix epoch, UTC

inline constexpr Timestamp kSecondsPerDay = 86400;
inline constexpr Timestamp kDefaultMonthLen = 30 * kSecondsPerDay;

struct EditRecord {
  EditorId editor_id = 0;
  Timestamp timestamp = 0;
  int ns = 0;  // 0 = main article namespace
  ArticleId article_id = 0;
  std::int64_t delta_chars = 0;
  bool was_reverted = false;
  std::optional<EditorId> reverted_by;
  bool is_revert_action = false;
  bool has_comment = false;

  friend bool operator==(const EditRecord&, const EditRecord&) = default;
};

struct EditorHistory {
  EditorId editor_id = 0;
  Timestamp registration_ts = 0;
  std::vector<EditRecord> edits;  // ascending by timestamp

  friend bool operator==(const EditorHistory&, const EditorHistory&) = default;
};

/// Where "now" is, and how long the backward/forward months are.
struct CutoffConfig {
  Timestamp cutoff_ts = 1283299200;  // 2010-09-01T00:00:00Z
  Timestamp month_len = kDefaultMonthLen;
  int persistence_months = 5;
  int target_months = 5;

  void validate() const {
    detail::require(month_len > 0, "month_len must be positive");
    detail::require(persistence_months >= 1, "persistence_months must be >= 1");
    detail::require(target_months >= 1, "target_months must be >= 1");
  }
};

/// Checks the record- and history-level invariants; throws IntegrityError.
inline void validate(const EditorHistory& h) {
  for (std::size_t i = 0; i < h.edits.size(); ++i) {
    const auto& e = h.edits[i];
    if (e.editor_id != h.editor_id) throw IntegrityError("edit belongs to a different editor");
    if (e.timestamp <= 0) throw IntegrityError("non-positive timestamp");
    if (!e.was_reverted && e.reverted_by) throw IntegrityError("reverted_by set on an edit that was not reverted");
    if (i > 0 && h.edits[i - 1].timestamp > e.timestamp) throw IntegrityError("edits not sorted by timestamp");
  }
  if (!h.edits.empty() && h.registration_ts > h.edits.front().timestamp) {
    throw IntegrityError("editor " + std::to_string(h.editor_id) + " edits before registering");
  }
}

// ---------------------------------------------------------------------------
// Windows.  Month m before the cutoff is [cutoff-(m+1)L, cutoff-mL).

/// Edits with timestamp in [cutoff - to*L, cutoff - from*L).
inline std::span<const EditRecord> edits_in_window(const EditorHistory& h, const CutoffConfig& cfg,
                                                   int from_month, int to_month) {
  if (from_month < 0 || from_month >= to_month) {
    throw ArgumentError("window requires 0 <= from_month < to_month, got (" + std::to_string(from_month) + ", " +
                        std::to_string(to_month) + ")");
  }
  const Timestamp lo = cfg.cutoff_ts - to_month * cfg.month_len;
  const Timestamp hi = cfg.cutoff_ts - from_month * cfg.month_len;
  const auto first = std::ranges::lower_bound(h.edits, lo, {}, &EditRecord::timestamp);
  const auto last = std::ranges::lower_bound(first, h.edits.end(), hi, {}, &EditRecord::timestamp);
  return {first, last};
}

inline std::int64_t window_count(const EditorHistory& h, const CutoffConfig& cfg, int from_month, int to_month) {
  return static_cast<std::int64_t>(edits_in_window(h, cfg, from_month, to_month).size());
}

inline std::int64_t day_index(Timestamp ts) {
  // floor division; timestamps are positive but keep it correct regardless
  return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

inline std::int64_t unique_edit_days(const EditorHistory& h, const CutoffConfig& cfg, int from_month, int to_month) {
  std::int64_t days = 0;
  std::int64_t last = 0;
  bool any = false;
  for (const auto& e : edits_in_window(h, cfg, from_month, to_month)) {
    const auto d = day_index(e.timestamp);
    if (!any || d != last) {
      ++days;
      last = d;
      any = true;
    }
  }
  return days;
}

/// Edits in the forward window [cutoff, cutoff + target_months*L).
inline std::span<const EditRecord> target_window(const EditorHistory& h, const CutoffConfig& cfg) {
  const Timestamp hi = cfg.cutoff_ts + cfg.target_months * cfg.month_len;
  const auto first = std::ranges::lower_bound(h.edits, cfg.cutoff_ts, {}, &EditRecord::timestamp);
  const auto last = std::ranges::lower_bound(first, h.edits.end(), hi, {}, &EditRecord::timestamp);
  return {first, last};
}

inline std::int64_t target_edits(const EditorHistory& h, const CutoffConfig& cfg) {
  return static_cast<std::int64_t>(target_window(h, cfg).size());
}

// ---------------------------------------------------------------------------
// TSV wire format.
//
// edits:         editor_id timestamp namespace article_id delta_chars
//                was_reverted reverted_by is_revert_action has_comment
// registrations: editor_id registration_ts

inline constexpr std::string_view kEditHeader =
    "editor_id\ttimestamp\tnamespace\tarticle_id\tdelta_chars\twas_reverted\treverted_by\tis_revert_action\thas_comment";
inline constexpr std::string_view kRegistrationHeader = "editor_id\tregistration_ts";

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::int64_t parse_int(std::string_view field, std::size_t line_no, std::string_view what) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    throw ParseError(line_no, "bad " + std::string(what) + " '" + std::string(field) + "'");
  }
  return v;
}

inline bool parse_flag(std::string_view field, std::size_t line_no, std::string_view what) {
  if (field == "0") return false;
  if (field == "1") return true;
  throw ParseError(line_no, "bad " + std::string(what) + " '" + std::string(field) + "' (expected 0/1)");
}

/// Calls fn(line, line_no) for each non-empty line; line numbers are 1-based.
template <class Fn>
void for_each_line(std::string_view text, bool header, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;
    if (header && line_no == 1) continue;
    if (line.empty()) continue;
    fn(line, line_no);
  }
}

}  // namespace detail

inline EditRecord parse_edit_line(std::string_view line, std::size_t line_no) {
  const auto f = detail::split_tabs(line);
  if (f.size() != 9) {
    throw ParseError(line_no, "expected 9 tab-separated fields, got " + std::to_string(f.size()));
  }
  EditRecord e;
  e.editor_id = detail::parse_int(f[0], line_no, "editor_id");
  e.timestamp = detail::parse_int(f[1], line_no, "timestamp");
  if (e.timestamp <= 0) throw ParseError(line_no, "timestamp must be positive");
  e.ns = static_cast<int>(detail::parse_int(f[2], line_no, "namespace"));
  e.article_id = detail::parse_int(f[3], line_no, "article_id");
  e.delta_chars = detail::parse_int(f[4], line_no, "delta_chars");
  e.was_reverted = detail::parse_flag(f[5], line_no, "was_reverted");
  if (!f[6].empty()) e.reverted_by = detail::parse_int(f[6], line_no, "reverted_by");
  if (!e.was_reverted && e.reverted_by) throw ParseError(line_no, "reverted_by given for an edit that was not reverted");
  e.is_revert_action = detail::parse_flag(f[7], line_no, "is_revert_action");
  e.has_comment = detail::parse_flag(f[8], line_no, "has_comment");
  return e;
}

/// Parses the two TSV streams into one history per registered editor,
/// ordered by editor id.  `header` says whether both streams start with a
/// header line.
inline std::vector<EditorHistory> parse_log(std::string_view edits_tsv, std::string_view registrations_tsv,
                                            bool header) {
  std::map<EditorId, EditorHistory> by_id;
  detail::for_each_line(registrations_tsv, header, [&](std::string_view line, std::size_t n) {
    const auto f = detail::split_tabs(line);
    if (f.size() != 2) throw ParseError(n, "expected 2 tab-separated fields, got " + std::to_string(f.size()));
    EditorHistory h;
    h.editor_id = detail::parse_int(f[0], n, "editor_id");
    h.registration_ts = detail::parse_int(f[1], n, "registration_ts");
    if (!by_id.emplace(h.editor_id, std::move(h)).second) {
      throw IntegrityError("registration line " + std::to_string(n) + ": duplicate editor_id " + std::string(f[0]));
    }
  });
  detail::for_each_line(edits_tsv, header, [&](std::string_view line, std::size_t n) {
    auto e = parse_edit_line(line, n);
    const auto it = by_id.find(e.editor_id);
    if (it == by_id.end()) {
      throw IntegrityError("edit line " + std::to_string(n) + ": editor_id " + std::to_string(e.editor_id) +
                           " has no registration");
    }
    it->second.edits.push_back(e);
  });
  std::vector<EditorHistory> out;
  out.reserve(by_id.size());
  for (auto& [id, h] : by_id) {
    std::ranges::stable_sort(h.edits, {}, &EditRecord::timestamp);
    validate(h);
    out.push_back(std::move(h));
  }
  return out;
}

inline void append_edit_line(std::string& out, const EditRecord& e) {
  out += std::to_string(e.editor_id);
  out += '\t';
  out += std::to_string(e.timestamp);
  out += '\t';
  out += std::to_string(e.ns);
  out += '\t';
  out += std::to_string(e.article_id);
  out += '\t';
  out += std::to_string(e.delta_chars);
  out += e.was_reverted ? "\t1\t" : "\t0\t";
  if (e.reverted_by) out += std::to_string(*e.reverted_by);
  out += e.is_revert_action ? "\t1" : "\t0";
  out += e.has_comment ? "\t1\n" : "\t0\n";
}

inline std::string serialize_edits(std::span<const EditorHistory> histories, bool header) {
  std::string out;
  if (header) {
    out += kEditHeader;
    out += '\n';
  }
  for (const auto& h : histories)
    for (const auto& e : h.edits) append_edit_line(out, e);
  return out;
}

inline std::string serialize_registrations(std::span<const EditorHistory> histories, bool header) {
  std::string out;
  if (header) {
    out += kRegistrationHeader;
    out += '\n';
  }
  for (const auto& h : histories) {
    out += std::to_string(h.editor_id);
    out += '\t';
    out += std::to_string(h.registration_ts);
    out += '\n';
  }
  return out;
}

}  // namespace editcast
