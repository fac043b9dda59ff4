#pragma once

// Leaderboard text table and standalone SVG diagnostics.  All numbers are
// printed with fixed precision so output is byte-stable.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "editcast/editlog.hpp"
#include "editcast/error.hpp"
#include "editcast/io.hpp"
#include "editcast/metrics.hpp"
#include "editcast/pipeline.hpp"
#include "editcast/synthgen.hpp"

namespace editcast {

inline std::string render_table(const std::vector<LeaderboardRow>& rows) {
  if (rows.empty()) throw ArgumentError("report: empty leaderboard");
  std::size_t w_name = std::string_view("model").size(), w_params = std::string_view("params").size();
  for (const auto& r : rows) {
    w_name = std::max(w_name, r.model_name.size());
    w_params = std::max(w_params, std::to_string(r.params).size());
  }
  auto pad = [](std::string s, std::size_t w, bool right) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    return right ? fill + s : s + fill;
  };
  std::string out = pad("model", w_name, false) + "  " + pad("params", w_params, true) + "  epsilon\n";
  out += std::string(w_name, '-') + "  " + std::string(w_params, '-') + "  -----------\n";
  for (const auto& r : rows) {
    out += pad(r.model_name, w_name, false) + "  " + pad(std::to_string(r.params), w_params, true) + "  " +
           io::format_fixed(r.epsilon, kEpsilonDecimals) + "\n";
  }
  return out;
}

namespace svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
  bool points = false;  // markers instead of a polyline
};

struct Chart {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
  std::vector<std::string> notes;  // lines printed in the top-right corner
};

inline std::string num(double v) { return io::format_fixed(v, 2); }

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string render(const Chart& c) {
  constexpr double W = 640, H = 440, L = 70, R = 20, T = 40, B = 50;
  auto tx = [&](double v) { return c.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return c.log_y ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : c.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((c.log_x && s.x[i] <= 0) || (c.log_y && s.y[i] <= 0)) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" viewBox=\"0 0 640 440\" "
       "font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"640\" height=\"440\" fill=\"white\"/>\n";
  o += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(c.title) + "</text>\n";
  o += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(W - L - R) + "\" height=\"" + num(H - T - B) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  // ticks: 5 evenly spaced positions in transformed space
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    const double sx = L + (W - L - R) * i / 4.0;
    const double sy = H - B - (H - T - B) * i / 4.0;
    const std::string lx = c.log_x ? "1e" + io::format_fixed(fx, 1) : io::format_fixed(fx, 1);
    const std::string ly = c.log_y ? "1e" + io::format_fixed(fy, 1) : io::format_fixed(fy, 1);
    o += "<text x=\"" + num(sx) + "\" y=\"" + num(H - B + 16) + "\" text-anchor=\"middle\">" + lx + "</text>\n";
    o += "<text x=\"" + num(L - 6) + "\" y=\"" + num(sy + 4) + "\" text-anchor=\"end\">" + ly + "</text>\n";
  }
  o += "<text x=\"" + num(L + (W - L - R) / 2) + "\" y=\"" + num(H - 12) + "\" text-anchor=\"middle\">" +
       escape(c.x_label) + "</text>\n";
  o += "<text x=\"16\" y=\"" + num(T + (H - T - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(T + (H - T - B) / 2) + ")\">" + escape(c.y_label) + "</text>\n";
  for (const auto& s : c.series) {
    if (s.points) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if ((c.log_x && s.x[i] <= 0) || (c.log_y && s.y[i] <= 0)) continue;
        o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"1.8\" fill=\"" + s.color + "\"/>\n";
      }
    } else {
      o += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + s.color + "\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if ((c.log_x && s.x[i] <= 0) || (c.log_y && s.y[i] <= 0)) continue;
        o += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      }
      o += "\"/>\n";
    }
  }
  double ny = T + 18;
  for (const auto& s : c.series) {
    o += "<text x=\"" + num(W - R - 8) + "\" y=\"" + num(ny) + "\" text-anchor=\"end\" fill=\"" + s.color + "\">" +
         escape(s.label) + "</text>\n";
    ny += 16;
  }
  for (const auto& n : c.notes) {
    o += "<text x=\"" + num(W - R - 8) + "\" y=\"" + num(ny) + "\" text-anchor=\"end\">" + escape(n) + "</text>\n";
    ny += 16;
  }
  o += "</svg>\n";
  return o;
}

}  // namespace svg

/// Per-editor edit counts over the `months` months before the cutoff.
inline std::vector<std::int64_t> pre_cutoff_counts(std::span<const EditorHistory> hs, const CutoffConfig& cfg,
                                                   int months = 12) {
  std::vector<std::int64_t> out;
  out.reserve(hs.size());
  for (const auto& h : hs) out.push_back(window_count(h, cfg, 0, months));
  return out;
}

struct CcdfReport {
  std::string svg;
  ParetoFit fit;
};

/// Log-log CCDF of the counts with the Hill fit above x_min drawn as a line.
/// x_min <= 0 selects the threshold automatically.
inline CcdfReport render_ccdf(std::span<const std::int64_t> counts, double x_min) {
  CcdfReport r;
  r.fit = x_min > 0 ? fit_pareto_tail(counts, x_min) : fit_pareto_tail_auto(counts);
  const auto pts = empirical_ccdf(counts, 1.0);
  svg::Series data{"empirical", "#1f77b4", {}, {}, true};
  for (const auto& p : pts) {
    data.x.push_back(p.x);
    data.y.push_back(p.ccdf);
  }
  // tail share: Pr(X > x_min) among positive counts
  std::size_t positive = 0, above = 0;
  double x_max = r.fit.x_min;
  for (auto c : counts) {
    if (c > 0) ++positive;
    if (static_cast<double>(c) > r.fit.x_min) ++above;
    x_max = std::max(x_max, static_cast<double>(c));
  }
  const double share = positive ? static_cast<double>(above) / static_cast<double>(positive) : 0.0;
  svg::Series line{"Hill fit", "#d62728", {}, {}, false};
  for (int i = 0; i <= 20; ++i) {
    const double x = r.fit.x_min * std::pow(x_max / r.fit.x_min, i / 20.0);
    line.x.push_back(x);
    line.y.push_back(share * std::pow(x / r.fit.x_min, -r.fit.lambda_hat));
  }
  svg::Chart c;
  c.title = "Edits per editor, 12 months before cutoff (CCDF)";
  c.x_label = "edits";
  c.y_label = "Pr(X >= x)";
  c.log_x = c.log_y = true;
  c.series = {data, line};
  c.notes = {"lambda = " + io::format_fixed(r.fit.lambda_hat, 3), "x_min = " + io::format_fixed(r.fit.x_min, 1),
             "n_tail = " + std::to_string(r.fit.n_tail)};
  r.svg = svg::render(c);
  return r;
}

/// Monthly totals by cohort (left half of the figure's story) as one chart.
inline std::string render_monthly(const CohortMonthlyTotals& t) {
  svg::Chart c;
  c.title = "Monthly total edits by cohort";
  c.x_label = "month (0 = oldest)";
  c.y_label = "edits";
  svg::Series o{"registered > 1 year before cutoff", "#1f77b4", {}, {}, false};
  svg::Series n{"registered within the last year", "#ff7f0e", {}, {}, false};
  for (std::size_t m = 0; m < t.old_editors.size(); ++m) {
    o.x.push_back(static_cast<double>(m));
    o.y.push_back(t.old_editors[m]);
    n.x.push_back(static_cast<double>(m));
    n.y.push_back(t.new_editors[m]);
  }
  c.series = {o, n};
  c.notes = {"old editors = " + std::to_string(t.n_old), "new editors = " + std::to_string(t.n_new)};
  return svg::render(c);
}

}  // namespace editcast
