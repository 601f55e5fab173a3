// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [name-substring ...] to run a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "desk.hpp"
#include "talents/adaptation/belief.hpp"
#include "talents/eval/stats.hpp"
#include "talents/kitchen/trajectory.hpp"
#include "talents/strategy/cluster.hpp"
#include "talents/strategy/vae.hpp"

using namespace talents;

namespace {

// Pinned tolerances and sizes.
constexpr double kWorkedExampleTol = 1e-6;
constexpr int kHedgeStreams = 1000;
constexpr int kFloorUpdates = 100000;
constexpr double kGradTol = 1e-4;
constexpr int kGradInstances = 20;
constexpr double kSilhouetteTol = 1e-12;
constexpr int kSilhouetteInstances = 50;
constexpr int kPlantedEpisodes = 50;
constexpr double kPlantedRate = 0.8;
constexpr int kPlantedK = 3;
constexpr int kSwitchEpisodes = 30;
constexpr int kTableEpisodesPerLayout = 30;
constexpr double kAlphaLevel = 0.05;
constexpr int kReplays = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

adaptation::BeliefState belief_of(std::vector<double> w, double eta, double alpha) {
  adaptation::BeliefState b;
  b.w = std::move(w);
  b.eta = eta;
  b.alpha = alpha;
  return b;
}

std::vector<double> uniform_losses(Rng& rng, int K, double scale) {
  std::vector<double> l(static_cast<std::size_t>(K));
  for (auto& x : l) x = scale * rng.uniform();
  return l;
}

// ---------------------------------------------------------------------------

Outcome fixed_share_examples() {
  const double e = std::exp(1.0);
  double worst = 0.0;
  auto diff = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  // Equal losses leave the weights unchanged.
  const auto same = adaptation::fixed_share_update(belief_of({0.2, 0.5, 0.3}, 0.5, 0.0), {0.7, 0.7, 0.7});
  diff(same.w[0], 0.2);
  diff(same.w[1], 0.5);
  diff(same.w[2], 0.3);
  const auto uni = adaptation::fixed_share_update(belief_of({0.25, 0.25, 0.25, 0.25}, 0.5, 0.05), {1, 1, 1, 1});
  for (double w : uni.w) diff(w, 0.25);
  const auto a0 = adaptation::fixed_share_update(belief_of({0.5, 0.5}, 1.0, 0.0), {0.0, 1.0});
  diff(a0.w[0], e / (e + 1));
  diff(a0.w[1], 1 / (e + 1));
  const auto a5 = adaptation::fixed_share_update(belief_of({0.5, 0.5}, 1.0, 0.5), {0.0, 1.0});
  diff(a5.w[0], 0.5 * e / (e + 1) + 0.25);
  diff(a5.w[1], 0.5 / (e + 1) + 0.25);
  return {worst <= kWorkedExampleTol, "max abs error " + fmt(worst) + " (tol 1e-6)"};
}

Outcome hedge_equivalence() {
  Rng rng(101);
  int mismatched = 0;
  for (int s = 0; s < kHedgeStreams; ++s) {
    const int K = 2 + static_cast<int>(rng.below(7));
    auto fs = belief_of(std::vector<double>(static_cast<std::size_t>(K), 1.0 / K), 0.5, 0.0);
    auto hedge = adaptation::init_static_belief(K, 0.5);
    bool same = fs.w == hedge.w;
    for (int t = 0; t < 50 && same; ++t) {
      const auto l = uniform_losses(rng, K, 5.0);
      fs = adaptation::fixed_share_update(fs, l);
      hedge = adaptation::hedge_update(hedge, l);
      same = fs.w == hedge.w;
    }
    mismatched += !same;
  }
  return {mismatched == 0, std::to_string(mismatched) + " of " + std::to_string(kHedgeStreams) + " streams differ bitwise"};
}

Outcome exploration_floor() {
  Rng rng(202);
  int violations = 0;
  double worst_norm = 0.0;
  auto b = adaptation::init_belief(3, 0.5, 0.05);
  for (int i = 0; i < kFloorUpdates; ++i) {
    if (i % 500 == 0) b = adaptation::init_belief(2 + static_cast<int>(rng.below(7)), 0.05 + 3.0 * rng.uniform(), 0.001 + 0.6 * rng.uniform());
    b = adaptation::fixed_share_update(b, uniform_losses(rng, b.size(), 50.0));
    double s = 0.0;
    for (double w : b.w) {
      violations += w < b.alpha / b.size();
      s += w;
    }
    worst_norm = std::max(worst_norm, std::abs(s - 1.0));
  }
  return {violations == 0 && worst_norm <= 1e-9,
          std::to_string(violations) + " floor violations in " + std::to_string(kFloorUpdates) + " updates, max |sum-1| " + fmt(worst_norm)};
}

// Loss of the best expert sequence with at most m switches (dynamic program).
double best_switching_loss(const std::vector<std::vector<double>>& s, int m) {
  const std::size_t K = s[0].size();
  std::vector<std::vector<double>> dp(static_cast<std::size_t>(m + 1), std::vector<double>(K, INFINITY));
  for (std::size_t c = 0; c < K; ++c) dp[0][c] = s[0][c];
  for (std::size_t t = 1; t < s.size(); ++t) {
    auto next = dp;
    for (int j = 0; j <= m; ++j) {
      double switch_in = INFINITY;
      if (j > 0)
        for (std::size_t c = 0; c < K; ++c) switch_in = std::min(switch_in, dp[static_cast<std::size_t>(j - 1)][c]);
      for (std::size_t c = 0; c < K; ++c)
        next[static_cast<std::size_t>(j)][c] = std::min(dp[static_cast<std::size_t>(j)][c], switch_in) + s[t][c];
    }
    dp = std::move(next);
  }
  double best = INFINITY;
  for (const auto& row : dp)
    for (double v : row) best = std::min(best, v);
  return best;
}

Outcome tracking_regret() {
  Rng rng(303);
  const int T = 1000;
  const double eta = 0.5;
  int violations = 0, cases = 0;
  double tightest = INFINITY;
  for (int K : {2, 4, 8})
    for (int m : {1, 3, 5})
      for (double alpha : {0.01, 0.05, 0.1})
        for (int rep = 0; rep < 3; ++rep) {
          // m switch points; the good expert draws from [0, 0.4], the rest from [0.3, 1].
          std::vector<int> cuts;
          for (int i = 0; i < m; ++i) cuts.push_back(1 + static_cast<int>(rng.below(T - 1)));
          std::sort(cuts.begin(), cuts.end());
          std::vector<std::vector<double>> s;
          int good = static_cast<int>(rng.below(static_cast<std::uint64_t>(K))), next_cut = 0;
          for (int t = 0; t < T; ++t) {
            while (next_cut < m && cuts[static_cast<std::size_t>(next_cut)] == t) {
              good = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
              ++next_cut;
            }
            std::vector<double> l(static_cast<std::size_t>(K));
            for (int c = 0; c < K; ++c) l[static_cast<std::size_t>(c)] = c == good ? 0.4 * rng.uniform() : 0.3 + 0.7 * rng.uniform();
            s.push_back(std::move(l));
          }
          auto b = adaptation::init_belief(K, eta, alpha);
          double mix = 0.0;
          for (const auto& l : s) {
            for (int c = 0; c < K; ++c) mix += b.w[static_cast<std::size_t>(c)] * l[static_cast<std::size_t>(c)];
            b = adaptation::fixed_share_update(b, l);
          }
          const double h = -alpha * std::log(alpha) - (1 - alpha) * std::log(1 - alpha);
          const double bound = eta / 8 * T + ((m + 1) * std::log(K) + m * std::log(1 / alpha) + (T - 1) * h) / eta;
          const double regret = mix - best_switching_loss(s, m);
          tightest = std::min(tightest, bound - regret);
          violations += regret > bound;
          ++cases;
        }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(cases) +
                               " streams, smallest slack " + fmt(tightest)};
}

Outcome elbo_gradient() {
  // Extended precision keeps rounding in the differenced losses well below
  // the tolerance, even for entries whose gradient is close to zero.
  Rng rng(404);
  double worst = 0.0;
  for (int inst = 0; inst < kGradInstances; ++inst) {
    strategy::VaeConfig cfg;
    cfg.latent_dim = 1 + static_cast<int>(rng.below(3));
    cfg.window = 2 + static_cast<int>(rng.below(3));
    cfg.horizon = 1 + static_cast<int>(rng.below(3));
    cfg.beta = rng.uniform();
    cfg.enc_hidden = 3 + static_cast<int>(rng.below(3));
    cfg.dec_hidden = 3 + static_cast<int>(rng.below(3));
    const int obs_dim = 3 + static_cast<int>(rng.below(3)), B = 1 + static_cast<int>(rng.below(3));
    strategy::VaeModel<long double> m;
    m.init(cfg, obs_dim, rng.next());
    strategy::Batch<long double> b;
    for (int k = 0; k < cfg.window; ++k) {
      strategy::Mat<long double> x = strategy::Mat<long double>::Zero(m.input_dim(), B);
      for (int j = 0; j < B; ++j) {
        for (int i = 0; i < obs_dim; ++i) x(i, j) = 2 * rng.uniform() - 1;
        x(obs_dim + static_cast<int>(rng.below(6)), j) = 1.0;
      }
      b.window.push_back(x);
    }
    b.obs = strategy::Mat<long double>(obs_dim, B);
    for (Eigen::Index j = 0; j < B; ++j)
      for (Eigen::Index i = 0; i < obs_dim; ++i) b.obs(i, j) = 2 * rng.uniform() - 1;
    b.targets = Eigen::MatrixXi(cfg.horizon, B);
    for (int k = 0; k < cfg.horizon; ++k)
      for (int j = 0; j < B; ++j) b.targets(k, j) = static_cast<int>(rng.below(kitchen::kNumMacroActions));
    strategy::Mat<long double> noise(cfg.latent_dim, B);
    for (Eigen::Index j = 0; j < B; ++j)
      for (Eigen::Index i = 0; i < cfg.latent_dim; ++i) noise(i, j) = rng.normal();
    auto params = m.params();
    nn::zero_grad(params);
    strategy::elbo_loss(m, b, cfg.beta, noise);
    const double eps = 1e-5;
    for (auto* p : params)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j)
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
          const long double keep = p->value(i, j);
          p->value(i, j) = keep + eps;
          const long double up = strategy::elbo_loss(m, b, cfg.beta, noise, false).loss;
          p->value(i, j) = keep - eps;
          const long double down = strategy::elbo_loss(m, b, cfg.beta, noise, false).loss;
          p->value(i, j) = keep;
          const double num = static_cast<double>((up - down) / (2 * eps)), ana = static_cast<double>(p->grad(i, j));
          worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
        }
  }
  return {worst <= kGradTol, "max relative error " + fmt(worst) + " over " + std::to_string(kGradInstances) + " instances (tol 1e-4)"};
}

Outcome silhouette_oracle() {
  Rng rng(505);
  double worst = 0.0;
  for (int inst = 0; inst < kSilhouetteInstances; ++inst) {
    const int k = 2 + static_cast<int>(rng.below(4));
    const int n = k + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(30 - k)));
    const int d = 1 + static_cast<int>(rng.below(4));
    strategy::Points pts;
    std::vector<int> a;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd p(d);
      for (int t = 0; t < d; ++t) p[t] = 10 * rng.uniform();
      pts.push_back(p);
      a.push_back(i < k ? i : static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));  // every cluster nonempty
    }
    const auto got = strategy::silhouette(pts, a);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
      std::vector<int> cnt(static_cast<std::size_t>(k), 0);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        double s2 = 0.0;
        for (int t = 0; t < d; ++t) s2 += (pts[i][t] - pts[j][t]) * (pts[i][t] - pts[j][t]);
        sum[static_cast<std::size_t>(a[j])] += std::sqrt(s2);
        ++cnt[static_cast<std::size_t>(a[j])];
      }
      const auto own = static_cast<std::size_t>(a[i]);
      double s = 0.0;
      if (cnt[own] > 0) {
        const double ai = sum[own] / cnt[own];
        double bi = INFINITY;
        for (std::size_t c = 0; c < sum.size(); ++c)
          if (c != own) bi = std::min(bi, sum[c] / cnt[c]);
        s = (bi - ai) / std::max(ai, bi);
      }
      worst = std::max(worst, std::abs(got.scores[static_cast<std::size_t>(i)] - s));
      mean += s;
    }
    worst = std::max(worst, std::abs(got.mean - mean / n));
  }
  return {worst <= kSilhouetteTol, "max abs difference " + fmt(worst) + " over " + std::to_string(kSilhouetteInstances) + " instances (tol 1e-12)"};
}

Outcome planted_identification() {
  const auto& p = testing::desk_pipeline("open");
  const auto assets = testing::desk_assets(p);
  const auto layout = kitchen::builtin_layout("open");
  const int held = p.cfg.population - p.cfg.train_members;
  int hits = 0;
  for (int e = 0; e < kPlantedEpisodes; ++e) {
    const int member = p.cfg.train_members + e % held;
    const int planted = p.planted_cluster(member);
    auto agent = eval::make_agent(assets, eval::AgentKind::talents);
    auto partner = p.population[static_cast<std::size_t>(member)].policy;
    const auto ep = eval::run_episode(*agent, partner, layout, e % 2, derive_seed(7001, static_cast<std::uint64_t>(e)));
    hits += !ep.belief.empty() && ep.belief.back().leader == planted;
  }
  const double rate = static_cast<double>(hits) / kPlantedEpisodes;
  std::string sil;
  for (std::size_t i = 0; i < p.silhouettes.size(); ++i) sil += (i ? "," : "") + fmt(p.silhouettes[i]);
  return {p.best_k == kPlantedK && rate >= kPlantedRate, "selected k=" + std::to_string(p.best_k) + " (silhouettes k=2..: " + sil +
                                                             "), planted leader at episode end in " + std::to_string(hits) + "/" +
                                                             std::to_string(kPlantedEpisodes) + " (need >= 80%)"};
}

Outcome switch_direction() {
  const auto& p = testing::desk_pipeline("open");
  const auto assets = testing::desk_assets(p);
  // First held-out pair whose planted clusters differ.
  int ia = -1, ib = -1;
  for (int i = p.cfg.train_members; i < p.cfg.population && ia < 0; ++i)
    for (int j = p.cfg.train_members; j < p.cfg.population; ++j)
      if (p.planted_cluster(i) != p.planted_cluster(j)) {
        ia = i;
        ib = j;
        break;
      }
  if (ia < 0) return {false, "no held-out pair with different planted clusters"};
  const auto& A = p.population[static_cast<std::size_t>(ia)].policy;
  const auto& B = p.population[static_cast<std::size_t>(ib)].policy;
  const auto tal = eval::partner_switch_experiment(assets, eval::AgentKind::talents, A, B, "open", kSwitchEpisodes, 7002);
  const auto sta = eval::partner_switch_experiment(assets, eval::AgentKind::talents_static, A, B, "open", kSwitchEpisodes, 7002);
  const auto t = eval::paired_t_test(tal.second_halves(), sta.second_halves());
  const double mt = eval::mean(tal.second_halves()), ms = eval::mean(sta.second_halves());
  return {ms < mt && t.p_two_sided < kAlphaLevel, A.id() + "->" + B.id() + ": second half static " + fmt(ms) + " vs adaptive " +
                                                      fmt(mt) + ", paired t=" + fmt(t.t) + " p=" + fmt(t.p_two_sided)};
}

Outcome holdout_direction() {
  bool pass = true;
  std::string detail;
  for (const std::string layout : {"open", "hallway"}) {
    const auto& p = testing::desk_pipeline(layout);
    const std::map<std::string, eval::Assets> assets = {{layout, testing::desk_assets(p)}};
    const auto ho = p.holdout();
    const int per_partner = kTableEpisodesPerLayout / static_cast<int>(ho.size());
    const auto tal = eval::eval_vs_holdout(assets, eval::AgentKind::talents, ho, {layout}, per_partner, 7003);
    const auto br = eval::eval_vs_holdout(assets, eval::AgentKind::best_response, ho, {layout}, per_partner, 7003);
    const auto t = eval::paired_t_test(tal.scores(), br.scores());
    const double mt = eval::mean(tal.scores()), mb = eval::mean(br.scores());
    const bool ok = mt >= mb && t.p_two_sided < kAlphaLevel;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + layout + ": adaptive " + fmt(mt) + " vs best-response " + fmt(mb) + " (n=" +
              std::to_string(tal.episodes.size()) + ", p=" + fmt(t.p_two_sided) + (ok ? ")" : ", fails)");
  }
  return {pass, detail};
}

Outcome environment_determinism() {
  Rng rng(606);
  int mismatched = 0;
  const auto& names = kitchen::layout_names();
  for (int r = 0; r < kReplays; ++r) {
    const std::string name(names[rng.below(names.size())]);
    const std::uint64_t seed = rng.next();
    const auto layout = kitchen::builtin_layout(name);
    const int T = kitchen::initial_state(layout, seed).episode_length;
    std::vector<kitchen::JointAction> acts;
    for (int t = 0; t < T; ++t)
      acts.push_back({static_cast<kitchen::PrimitiveAction>(rng.below(kitchen::kNumPrimitiveActions)),
                      static_cast<kitchen::PrimitiveAction>(rng.below(kitchen::kNumPrimitiveActions))});
    auto a = kitchen::initial_state(layout, seed), b = kitchen::initial_state(kitchen::builtin_layout(name), seed);
    bool same = a == b;
    kitchen::Trajectory traj;
    traj.layout = name;
    traj.layout_version = layout->version;
    traj.seed = seed;
    traj.episode_length = T;
    traj.policy_ids = {"random", "random"};
    for (const auto& ja : acts) {
      kitchen::TrajectoryStep st;
      st.tick = a.tick;
      for (int p = 0; p < 2; ++p) st.obs[static_cast<std::size_t>(p)] = kitchen::to_stored(kitchen::observe(a, p));
      auto ra = kitchen::step(a, ja);
      auto rb = kitchen::step(b, ja);
      same = same && ra.state == rb.state && ra.reward == rb.reward && ra.events == rb.events;
      st.actions = ja;
      st.reward = ra.reward;
      st.events = ra.events;
      traj.steps.push_back(std::move(st));
      a = std::move(ra.state);
      b = std::move(rb.state);
    }
    traj.score = a.score;
    // Through the on-disk format as well.
    std::stringstream io;
    kitchen::write_trajectory(io, traj);
    same = same && kitchen::replay_matches(kitchen::read_trajectory(io));
    mismatched += !same;
  }
  return {mismatched == 0, std::to_string(mismatched) + " of " + std::to_string(kReplays) + " replays differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"fixed_share_worked_examples", fixed_share_examples},
      {"hedge_equivalence", hedge_equivalence},
      {"exploration_floor", exploration_floor},
      {"tracking_regret_bound", tracking_regret},
      {"elbo_gradient_check", elbo_gradient},
      {"silhouette_oracle", silhouette_oracle},
      {"environment_determinism", environment_determinism},
      {"planted_cluster_identification", planted_identification},
      {"partner_switch_direction", switch_direction},
      {"holdout_vs_best_response", holdout_direction},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::none_of(only.begin(), only.end(), [&](const std::string& o) { return name.find(o) != std::string::npos; }))
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-32s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
    ++ran;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
