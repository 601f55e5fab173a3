#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "talents/eval/experiments.hpp"

namespace talents::eval {

namespace detail {

inline constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

inline std::string header(int w, int h, const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + std::to_string(w / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
}

}  // namespace detail

/// Grouped bars of first- and second-half mean reward per report, with
/// one-standard-deviation whiskers.
inline std::string halves_svg(const std::vector<EvalReport>& reports, const std::string& title) {
  using detail::fmt;
  const int W = 120 + 140 * static_cast<int>(reports.size()), H = 320, top = 40, bottom = 260, left = 60;
  double hi = 1.0;
  for (const auto& r : reports)
    for (const auto& v : {r.first_halves(), r.second_halves()}) hi = std::max(hi, mean(v) + stddev(v));
  auto y = [&](double v) { return bottom - (bottom - top) * v / hi; };
  std::string s = detail::header(W, H, title);
  s += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(bottom) + "\" x2=\"" + std::to_string(W - 20) +
       "\" y2=\"" + std::to_string(bottom) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = hi * k / 4.0;
    s += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + fmt(y(v) + 4) + "\" text-anchor=\"end\">" + fmt(std::round(v)) +
         "</text>\n";
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double x0 = left + 30 + 140.0 * static_cast<double>(i);
    const std::array<std::vector<double>, 2> halves = {reports[i].first_halves(), reports[i].second_halves()};
    for (int h = 0; h < 2; ++h) {
      const double m = mean(halves[static_cast<std::size_t>(h)]), sd = stddev(halves[static_cast<std::size_t>(h)]);
      const double x = x0 + 45.0 * h;
      s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y(m)) + "\" width=\"40\" height=\"" + fmt(bottom - y(m)) + "\" fill=\"" +
           detail::kPalette[static_cast<std::size_t>(h)] + "\"/>\n";
      s += "<line x1=\"" + fmt(x + 20) + "\" y1=\"" + fmt(y(m + sd)) + "\" x2=\"" + fmt(x + 20) + "\" y2=\"" +
           fmt(y(std::max(0.0, m - sd))) + "\" stroke=\"black\"/>\n";
    }
    s += "<text x=\"" + fmt(x0 + 42) + "\" y=\"" + std::to_string(bottom + 18) + "\" text-anchor=\"middle\">" +
         reports[i].agent + "</text>\n";
  }
  s += "<rect x=\"" + std::to_string(W - 150) + "\" y=\"30\" width=\"12\" height=\"12\" fill=\"" + detail::kPalette[0] +
       "\"/><text x=\"" + std::to_string(W - 134) + "\" y=\"40\">first half</text>\n";
  s += "<rect x=\"" + std::to_string(W - 150) + "\" y=\"48\" width=\"12\" height=\"12\" fill=\"" + detail::kPalette[1] +
       "\"/><text x=\"" + std::to_string(W - 134) + "\" y=\"58\">second half</text>\n";
  return s + "</svg>\n";
}

/// Mean belief weight per cluster over ticks, across the report's episodes,
/// with a dashed marker at `mark_tick` (e.g. the partner switch); -1: none.
inline std::string belief_svg(const EvalReport& r, const std::string& title, int mark_tick = -1) {
  using detail::fmt;
  int T = 0, K = 0;
  for (const auto& e : r.episodes)
    for (const auto& b : e.belief) {
      T = std::max(T, b.tick + 1);
      K = std::max(K, static_cast<int>(b.w.size()));
    }
  const int W = 640, H = 320, top = 40, bottom = 270, left = 50, right = W - 130;
  std::string s = detail::header(W, H, title);
  if (T == 0 || K == 0) return s + "<text x=\"50\" y=\"100\">no belief trace recorded</text>\n</svg>\n";
  std::vector<std::vector<double>> sum(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(T), 0.0));
  std::vector<int> n(static_cast<std::size_t>(T), 0);
  for (const auto& e : r.episodes)
    for (const auto& b : e.belief) {
      for (int c = 0; c < K; ++c) sum[static_cast<std::size_t>(c)][static_cast<std::size_t>(b.tick)] += b.w[static_cast<std::size_t>(c)];
      ++n[static_cast<std::size_t>(b.tick)];
    }
  auto x = [&](double t) { return left + (right - left) * t / std::max(1, T - 1); };
  auto y = [&](double w) { return bottom - (bottom - top) * w; };
  s += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(bottom) + "\" x2=\"" + std::to_string(right) +
       "\" y2=\"" + std::to_string(bottom) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top) + "\" x2=\"" + std::to_string(left) +
       "\" y2=\"" + std::to_string(bottom) + "\" stroke=\"black\"/>\n";
  for (double w : {0.0, 0.5, 1.0})
    s += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + fmt(y(w) + 4) + "\" text-anchor=\"end\">" + fmt(w) + "</text>\n";
  s += "<text x=\"" + fmt((left + right) / 2.0) + "\" y=\"" + std::to_string(bottom + 30) + "\" text-anchor=\"middle\">tick</text>\n";
  for (int c = 0; c < K; ++c) {
    std::string pts;
    for (int t = 0; t < T; ++t)
      if (n[static_cast<std::size_t>(t)] > 0)
        pts += fmt(x(t)) + "," + fmt(y(sum[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)] / n[static_cast<std::size_t>(t)])) + " ";
    const char* col = detail::kPalette[static_cast<std::size_t>(c) % detail::kPalette.size()];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    s += "<text x=\"" + std::to_string(right + 10) + "\" y=\"" + std::to_string(top + 16 * c + 10) + "\" fill=\"" + col +
         "\">cluster " + std::to_string(c) + "</text>\n";
  }
  if (mark_tick >= 0)
    s += "<line x1=\"" + fmt(x(mark_tick)) + "\" y1=\"" + std::to_string(top) + "\" x2=\"" + fmt(x(mark_tick)) + "\" y2=\"" +
         std::to_string(bottom) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  return s + "</svg>\n";
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << text;
}

}  // namespace talents::eval
