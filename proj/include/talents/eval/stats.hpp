#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "talents/core/error.hpp"
#include "talents/core/rng.hpp"

namespace talents::eval {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
inline double stddev(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

struct TTest {
  double mean_diff = 0.0;
  double t = 0.0;
  int df = 0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;  // H1: mean(x - y) > 0
  double p_less = 1.0;     // H1: mean(x - y) < 0
};

/// Paired t-test on x - y. Zero-variance differences give t = +-inf (or 0
/// when all differences are 0).
inline TTest paired_t_test(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "paired_t_test: samples differ in length");
  require(x.size() >= 2, "paired_t_test: needs at least 2 pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  TTest r;
  r.mean_diff = mean(d);
  r.df = static_cast<int>(d.size()) - 1;
  const double se = stddev(d) / std::sqrt(static_cast<double>(d.size()));
  if (se == 0.0) {
    r.t = r.mean_diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    r.p_two_sided = r.mean_diff == 0.0 ? 1.0 : 0.0;
    r.p_greater = r.mean_diff > 0.0 ? 0.0 : 1.0;
    r.p_less = r.mean_diff < 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.t = r.mean_diff / se;
  boost::math::students_t dist(r.df);
  r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
  r.p_less = boost::math::cdf(dist, r.t);
  r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_greater, r.p_less));
  return r;
}

/// Percentile bootstrap confidence interval of the mean.
inline std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& x, double level, int resamples,
                                                   std::uint64_t seed) {
  require(!x.empty(), "bootstrap_mean_ci: empty sample");
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[rng.below(x.size())];
    m = s / static_cast<double>(x.size());
  }
  std::sort(means.begin(), means.end());
  const double lo = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(std::clamp(q * static_cast<double>(resamples - 1), 0.0,
                                                        static_cast<double>(resamples - 1)));
    return means[i];
  };
  return {at(lo), at(1.0 - lo)};
}

}  // namespace talents::eval
