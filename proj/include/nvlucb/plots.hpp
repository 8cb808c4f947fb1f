#pragma once

// Standalone SVG 1.1 plots: cumulative regret curves (mean with min-max band
// across seeds) and reliability diagrams.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nvlucb {

struct RegretSeries {
  std::string agent;
  std::vector<std::vector<double>> per_seed;  // cumulative regret, one vector per seed
};

struct ReliabilitySeries {
  std::string agent;
  std::vector<std::pair<double, double>> bins;  // (threshold, empirical frequency)
};

namespace svg_detail {

inline constexpr double kWidth = 800, kHeight = 500;
inline constexpr double kLeft = 70, kRight = 180, kTop = 30, kBottom = 50;

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[i % 10];
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const {
    return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

inline void header(std::ostringstream& o, std::string_view title) {
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
    << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
    << "<title>" << escape(title) << "</title>\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" fill=\"white\"/>\n";
}

inline void axes(std::ostringstream& o, const Frame& f, std::string_view xlabel,
                 std::string_view ylabel) {
  const double l = f.px(f.x0), r = f.px(f.x1), b = f.py(f.y0), t = f.py(f.y1);
  o << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n"
    << "<line x1=\"" << num(l) << "\" y1=\"" << num(b) << "\" x2=\"" << num(r) << "\" y2=\""
    << num(b) << "\"/>\n"
    << "<line x1=\"" << num(l) << "\" y1=\"" << num(b) << "\" x2=\"" << num(l) << "\" y2=\""
    << num(t) << "\"/>\n</g>\n";
  o << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(b + 16) << "\" text-anchor=\"middle\">"
      << tick(xv) << "</text>\n";
    o << "<text x=\"" << num(l - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">"
      << tick(yv) << "</text>\n";
  }
  o << "<text x=\"" << num((l + r) / 2) << "\" y=\"" << num(kHeight - 12)
    << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
    << "<text x=\"16\" y=\"" << num((t + b) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num((t + b) / 2) << ")\">" << escape(ylabel) << "</text>\n</g>\n";
}

inline void legend(std::ostringstream& o, const std::vector<std::string>& names) {
  o << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 15;
    o << "<line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + 20) << "\" y2=\""
      << num(y) << "\" stroke=\"" << color(i) << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << num(x + 26) << "\" y=\"" << num(y + 4) << "\">" << escape(names[i])
      << "</text>\n";
  }
  o << "</g>\n";
}

}  // namespace svg_detail

/// Mean cumulative regret per agent; a shaded min-max band when an agent has
/// two or more seeds.
inline std::string regret_svg(const std::vector<RegretSeries>& series) {
  using namespace svg_detail;
  std::size_t rounds = 1;
  double ymax = 0.0;
  for (const auto& s : series)
    for (const auto& run : s.per_seed) {
      rounds = std::max(rounds, run.size());
      for (double v : run) ymax = std::max(ymax, v);
    }
  if (!(ymax > 0.0)) ymax = 1.0;
  const Frame f{0.0, static_cast<double>(rounds), 0.0, ymax * 1.05};
  const std::size_t stride = std::max<std::size_t>(1, rounds / 400);

  std::ostringstream o;
  header(o, "Cumulative regret");
  axes(o, f, "round", "cumulative regret");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    names.push_back(s.agent);
    if (s.per_seed.empty()) continue;
    std::size_t len = s.per_seed.front().size();
    for (const auto& run : s.per_seed) len = std::min(len, run.size());
    if (len == 0) continue;

    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < len; t += stride) idx.push_back(t);
    if (idx.back() != len - 1) idx.push_back(len - 1);

    std::vector<double> lo(idx.size()), hi(idx.size()), mean(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double mn = s.per_seed[0][idx[j]], mx = mn, sum = 0.0;
      for (const auto& run : s.per_seed) {
        mn = std::min(mn, run[idx[j]]);
        mx = std::max(mx, run[idx[j]]);
        sum += run[idx[j]];
      }
      lo[j] = mn;
      hi[j] = mx;
      mean[j] = sum / static_cast<double>(s.per_seed.size());
    }
    if (s.per_seed.size() >= 2) {
      o << "<polygon class=\"band\" fill=\"" << color(i) << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t j = 0; j < idx.size(); ++j)
        o << num(f.px(static_cast<double>(idx[j] + 1))) << "," << num(f.py(hi[j])) << " ";
      for (std::size_t j = idx.size(); j-- > 0;)
        o << num(f.px(static_cast<double>(idx[j] + 1))) << "," << num(f.py(lo[j])) << " ";
      o << "\"/>\n";
    }
    o << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color(i) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < idx.size(); ++j)
      o << num(f.px(static_cast<double>(idx[j] + 1))) << "," << num(f.py(mean[j])) << " ";
    o << "\"/>\n";
  }
  legend(o, names);
  o << "</svg>\n";
  return o.str();
}

/// Empirical coverage against nominal level, with the diagonal for reference.
inline std::string reliability_svg(const std::vector<ReliabilitySeries>& series,
                                   std::string_view title = "Reliability diagram") {
  using namespace svg_detail;
  const Frame f{0.0, 1.0, 0.0, 1.0};
  std::ostringstream o;
  header(o, title);
  axes(o, f, "nominal level", "empirical coverage");
  o << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(1))
    << "\" y2=\"" << num(f.py(1)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    names.push_back(series[i].agent);
    o << "<polyline fill=\"none\" stroke=\"" << color(i) << "\" stroke-width=\"2\" points=\"";
    for (const auto& [p, q] : series[i].bins) o << num(f.px(p)) << "," << num(f.py(q)) << " ";
    o << "\"/>\n";
    for (const auto& [p, q] : series[i].bins)
      o << "<circle cx=\"" << num(f.px(p)) << "\" cy=\"" << num(f.py(q)) << "\" r=\"3\" fill=\""
        << color(i) << "\"/>\n";
  }
  legend(o, names);
  o << "</svg>\n";
  return o.str();
}

}  // namespace nvlucb
