#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "talents/core/error.hpp"
#include "talents/core/hash.hpp"
#include "talents/core/rng.hpp"

namespace talents::strategy {

using Points = std::vector<Eigen::VectorXd>;

inline constexpr double kVarianceFloor = 1e-3;

struct KMeansResult {
  std::vector<int> assignments;
  Points centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  int iterations = 0;
};

namespace detail {

inline double sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm(); }

inline int nearest(const Eigen::VectorXd& p, const Points& cs, double* d2 = nullptr) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cs.size(); ++c) {
    const double d = sq_dist(p, cs[c]);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (d2) *d2 = bd;
  return best;
}

inline double inertia_of(const Points& pts, const std::vector<int>& a, const Points& cs) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += sq_dist(pts[i], cs[static_cast<std::size_t>(a[i])]);
  return s;
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations until the largest centroid
/// shift is below 1e-6 or 300 iterations. An empty cluster is reseeded to the
/// point farthest from its current centroid.
inline KMeansResult kmeans(const Points& pts, int k, std::uint64_t seed, int max_iter = 300, double tol = 1e-6) {
  require(k >= 1, "kmeans: k must be >= 1");
  require(static_cast<std::size_t>(k) <= pts.size(), "kmeans: k exceeds the number of points");
  const std::size_t n = pts.size();
  Rng rng(seed);
  KMeansResult r;
  r.centroids.push_back(pts[rng.below(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(r.centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      detail::nearest(pts[i], r.centroids, &d2[i]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.below(n);  // every point already sits on a centroid
    } else {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;
    }
    r.centroids.push_back(pts[pick]);
  }

  r.assignments.assign(n, 0);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) r.assignments[i] = detail::nearest(pts[i], r.centroids);
    r.inertia_history.push_back(detail::inertia_of(pts, r.assignments, r.centroids));
    Points next(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(pts[0].size()));
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      next[static_cast<std::size_t>(r.assignments[i])] += pts[i];
      ++count[static_cast<std::size_t>(r.assignments[i])];
    }
    for (int c = 0; c < k; ++c)
      if (count[static_cast<std::size_t>(c)] > 0) next[static_cast<std::size_t>(c)] /= count[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      if (count[cu] > 0) continue;
      // Empty cluster: take the point farthest from its own centroid.
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(r.assignments[i]);
        if (count[own] < 2) continue;
        const double d = detail::sq_dist(pts[i], next[own]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      const auto from = static_cast<std::size_t>(r.assignments[far]);
      next[from] = (next[from] * count[from] - pts[far]) / (count[from] - 1);
      --count[from];
      r.assignments[far] = c;
      next[cu] = pts[far];
      count[cu] = 1;
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c)
      shift = std::max(shift, (next[static_cast<std::size_t>(c)] - r.centroids[static_cast<std::size_t>(c)]).norm());
    r.centroids = std::move(next);
    r.iterations = it + 1;
    if (shift < tol) break;
  }
  for (std::size_t i = 0; i < n; ++i) r.assignments[i] = detail::nearest(pts[i], r.centroids);
  r.inertia = detail::inertia_of(pts, r.assignments, r.centroids);
  return r;
}

struct SilhouetteResult {
  std::vector<double> scores;
  double mean = 0.0;
};

/// Euclidean silhouette. Points in singleton clusters score 0.
inline SilhouetteResult silhouette(const Points& pts, const std::vector<int>& assignments) {
  require(pts.size() == assignments.size(), "silhouette: one assignment per point");
  int k = 0;
  for (int a : assignments) {
    require(a >= 0, "silhouette: negative cluster id");
    k = std::max(k, a + 1);
  }
  std::vector<int> size(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++size[static_cast<std::size_t>(a)];
  require(k >= 2, "silhouette: needs at least two clusters");
  for (int s : size) require(s > 0, "silhouette: every cluster id below the maximum must be non-empty");
  const std::size_t n = pts.size();
  SilhouetteResult r;
  r.scores.assign(n, 0.0);
  std::vector<double> sum(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(assignments[i]);
    if (size[own] == 1) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum[static_cast<std::size_t>(assignments[j])] += (pts[i] - pts[j]).norm();
    const double a = sum[own] / (size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c)
      if (c != own) b = std::min(b, sum[c] / size[c]);
    const double m = std::max(a, b);
    r.scores[i] = m > 0.0 ? (b - a) / m : 0.0;
  }
  for (double s : r.scores) r.mean += s;
  r.mean /= static_cast<double>(n);
  return r;
}

/// One latent strategy type: a diagonal Gaussian over z plus its sampling
/// priority for cooperator training.
struct StrategyCluster {
  int id = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  int count = 0;
  double priority = 0.0;
};

struct SelectKResult {
  int best_k = 0;
  std::vector<StrategyCluster> clusters;
  std::vector<int> assignments;            // for best_k
  std::vector<int> k_values;
  std::vector<double> mean_silhouette;     // per k in k_values
  std::vector<std::vector<int>> all_assignments;
};

/// Fits member mean and floored member variance per cluster; priorities
/// start uniform.
inline std::vector<StrategyCluster> fit_gaussians(const Points& pts, const std::vector<int>& assignments, int k) {
  std::vector<StrategyCluster> out(static_cast<std::size_t>(k));
  const Eigen::Index d = pts.empty() ? 0 : pts[0].size();
  for (int c = 0; c < k; ++c) {
    auto& cl = out[static_cast<std::size_t>(c)];
    cl.id = c;
    cl.mean = Eigen::VectorXd::Zero(d);
    cl.variance = Eigen::VectorXd::Zero(d);
    cl.priority = 1.0 / k;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto& cl = out[static_cast<std::size_t>(assignments[i])];
    cl.mean += pts[i];
    ++cl.count;
  }
  for (auto& cl : out)
    if (cl.count > 0) cl.mean /= cl.count;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto& cl = out[static_cast<std::size_t>(assignments[i])];
    cl.variance += (pts[i] - cl.mean).cwiseAbs2();
  }
  for (auto& cl : out) {
    if (cl.count > 0) cl.variance /= cl.count;
    cl.variance = cl.variance.cwiseMax(kVarianceFloor);
  }
  return out;
}

/// k-means (3 restarts, best inertia) per k; the k with the highest mean
/// silhouette wins, ties going to the smaller k.
inline SelectKResult select_k(const Points& pts, const std::vector<int>& k_range, std::uint64_t seed, int restarts = 3) {
  require(!k_range.empty(), "select_k: empty k range");
  for (int k : k_range)
    require(k >= 2 && static_cast<std::size_t>(k) + 1 <= pts.size(), "select_k: k must lie in [2, |points| - 1]");
  SelectKResult r;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> ks = k_range;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (int k : ks) {
    KMeansResult km;
    for (int rs = 0; rs < restarts; ++rs) {
      KMeansResult cand = kmeans(pts, k, derive_seed(seed, static_cast<std::uint64_t>(k) * 1000 + static_cast<std::uint64_t>(rs)));
      if (rs == 0 || cand.inertia < km.inertia) km = std::move(cand);
    }
    const double s = silhouette(pts, km.assignments).mean;
    r.k_values.push_back(k);
    r.mean_silhouette.push_back(s);
    r.all_assignments.push_back(km.assignments);
    if (s > best) {
      best = s;
      r.best_k = k;
      r.assignments = km.assignments;
    }
  }
  r.clusters = fit_gaussians(pts, r.assignments, r.best_k);
  return r;
}

/// Parses "2:8" (inclusive) or a single integer.
inline std::vector<int> parse_k_range(const std::string& s) {
  std::vector<int> out;
  try {
    const auto colon = s.find(':');
    const int lo = std::stoi(s.substr(0, colon));
    const int hi = colon == std::string::npos ? lo : std::stoi(s.substr(colon + 1));
    if (hi < lo) throw ConfigError("k range " + s + " is empty");
    for (int k = lo; k <= hi; ++k) out.push_back(k);
  } catch (const std::logic_error&) {
    throw ConfigError("k range must look like LO:HI, got '" + s + "'");
  }
  return out;
}

// Cluster file: JSON {"format": "talents-clusters", "version": 1,
// "latent_dim", "vae_config_hash", "clusters": [{id, mean, variance, count,
// priority}], ...}.
inline constexpr int kClusterFormatVersion = 1;

inline void save_clusters(const std::string& path, const std::vector<StrategyCluster>& cs,
                          nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json j = std::move(extra);
  j["format"] = "talents-clusters";
  j["version"] = kClusterFormatVersion;
  j["latent_dim"] = cs.empty() ? 0 : cs[0].mean.size();
  auto& arr = j["clusters"] = nlohmann::json::array();
  for (const auto& c : cs)
    arr.push_back({{"id", c.id},
                   {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                   {"variance", std::vector<double>(c.variance.data(), c.variance.data() + c.variance.size())},
                   {"count", c.count},
                   {"priority", c.priority}});
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed for " + path);
}

inline std::vector<StrategyCluster> load_clusters(const std::string& path, nlohmann::json* meta = nullptr) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cluster file " + path + ": " + e.what());
  }
  if (j.value("format", "") != "talents-clusters") throw FormatError(path + " is not a cluster file");
  if (j.value("version", -1) != kClusterFormatVersion) throw FormatError(path + ": unsupported cluster file version");
  std::vector<StrategyCluster> out;
  const int d = j.value("latent_dim", 0);
  try {
    for (const auto& c : j.at("clusters")) {
      StrategyCluster s;
      s.id = c.at("id").get<int>();
      const auto m = c.at("mean").get<std::vector<double>>();
      const auto v = c.at("variance").get<std::vector<double>>();
      if (static_cast<int>(m.size()) != d || static_cast<int>(v.size()) != d)
        throw FormatError(path + ": cluster " + std::to_string(s.id) + " has the wrong dimension");
      s.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), d);
      s.variance = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
      s.count = c.at("count").get<int>();
      s.priority = c.at("priority").get<double>();
      if (s.id != static_cast<int>(out.size())) throw FormatError(path + ": cluster ids must be 0..K-1 in order");
      if (!(s.variance.array() > 0.0).all() || !s.mean.allFinite())
        throw FormatError(path + ": cluster " + std::to_string(s.id) + " has non-positive variance or non-finite mean");
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cluster file " + path + ": " + e.what());
  }
  if (out.empty()) throw FormatError(path + ": no clusters");
  if (meta) *meta = j;
  return out;
}

}  // namespace talents::strategy
