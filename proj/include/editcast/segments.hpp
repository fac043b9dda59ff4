#pragma once

// Editor cohort schemes.  Every model is fitted independently per cell.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "editcast/error.hpp"
#include "editcast/features.hpp"

namespace editcast {

enum class SegmentScheme { whole, join_date3, old_new2, activity_days, nested7 };

struct SegmentId {
  SegmentScheme scheme = SegmentScheme::whole;
  int cell = 0;
  friend bool operator==(const SegmentId&, const SegmentId&) = default;
};

inline constexpr int cell_count(SegmentScheme s) {
  switch (s) {
    case SegmentScheme::whole: return 1;
    case SegmentScheme::join_date3: return 3;
    case SegmentScheme::old_new2: return 2;
    case SegmentScheme::activity_days: return 3;
    case SegmentScheme::nested7: return 7;
  }
  return 1;
}

inline constexpr std::string_view scheme_name(SegmentScheme s) {
  switch (s) {
    case SegmentScheme::whole: return "whole";
    case SegmentScheme::join_date3: return "join3";
    case SegmentScheme::old_new2: return "oldnew2";
    case SegmentScheme::activity_days: return "activity";
    case SegmentScheme::nested7: return "nested7";
  }
  return "whole";
}

inline SegmentScheme parse_scheme(std::string_view name) {
  for (auto s : {SegmentScheme::whole, SegmentScheme::join_date3, SegmentScheme::old_new2,
                 SegmentScheme::activity_days, SegmentScheme::nested7}) {
    if (scheme_name(s) == name) return s;
  }
  throw ArgumentError("unknown segment scheme '" + std::string(name) + "'");
}

inline std::string cell_label(SegmentScheme s, int cell) {
  static constexpr std::array<const char*, 3> join3 = {"joined<5mo", "joined5-12mo", "joined>12mo"};
  static constexpr std::array<const char*, 2> oldnew = {"old", "new"};
  static constexpr std::array<const char*, 3> activity = {"days0", "days1-2", "days3+"};
  static constexpr std::array<const char*, 7> nested = {"old/days0",   "old/days1-2",  "old/days3+", "new/days0",
                                                        "new/days1-2", "new/days3-10", "new/days11+"};
  switch (s) {
    case SegmentScheme::whole: return "all";
    case SegmentScheme::join_date3: return join3.at(static_cast<std::size_t>(cell));
    case SegmentScheme::old_new2: return oldnew.at(static_cast<std::size_t>(cell));
    case SegmentScheme::activity_days: return activity.at(static_cast<std::size_t>(cell));
    case SegmentScheme::nested7: return nested.at(static_cast<std::size_t>(cell));
  }
  return "?";
}

inline constexpr double kFiveMonthsDays = 150.0;   // 5 x 30-day months
inline constexpr double kTwelveMonthsDays = 360.0;  // 12 x 30-day months
inline constexpr double kOldEditorDays = 365.0;     // registered before cutoff - 365 days

/// Boundary ages fall into the older cell.
inline SegmentId assign(double age_days, std::int64_t d_p, SegmentScheme scheme) {
  detail::require(age_days >= 0.0 && d_p >= 0, "assign requires age_days >= 0 and d_p >= 0");
  const bool old = age_days >= kOldEditorDays;
  const int band3 = d_p == 0 ? 0 : (d_p <= 2 ? 1 : 2);
  int cell = 0;
  switch (scheme) {
    case SegmentScheme::whole: cell = 0; break;
    case SegmentScheme::join_date3: cell = age_days < kFiveMonthsDays ? 0 : (age_days < kTwelveMonthsDays ? 1 : 2); break;
    case SegmentScheme::old_new2: cell = old ? 0 : 1; break;
    case SegmentScheme::activity_days: cell = band3; break;
    case SegmentScheme::nested7:
      cell = old ? band3 : 3 + (d_p == 0 ? 0 : (d_p <= 2 ? 1 : (d_p <= 10 ? 2 : 3)));
      break;
  }
  return {scheme, cell};
}

inline SegmentId assign(const SegmentKey& key, SegmentScheme scheme) { return assign(key.age_days, key.d_p, scheme); }

}  // namespace editcast
