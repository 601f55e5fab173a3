#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "talents/adaptation/adapter.hpp"
#include "talents/adaptation/belief.hpp"
#include "talents/partners/population.hpp"

using namespace talents;
using namespace talents::adaptation;
using Catch::Approx;

namespace {

BeliefState raw_belief(std::vector<double> w, double eta, double alpha) {
  BeliefState b;
  b.w = std::move(w);
  b.eta = eta;
  b.alpha = alpha;
  return b;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::vector<double> random_losses(Rng& rng, int K, double scale = 5.0) {
  std::vector<double> l(static_cast<std::size_t>(K));
  for (auto& x : l) x = rng.uniform() * scale;
  return l;
}

// Exponential weights computed the textbook way, no shifting.
std::vector<double> naive_share(const std::vector<double>& w, const std::vector<double>& l, double eta, double alpha) {
  std::vector<double> v(w.size());
  double total = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) total += v[c] = w[c] * std::exp(-eta * l[c]);
  for (auto& x : v) x = (1.0 - alpha) * x / total + alpha / static_cast<double>(w.size());
  return v;
}

// Piecewise-constant stream: m switch points drawn uniformly; in each
// segment one random expert draws losses from [0, 0.4], the others from
// [0.3, 1].
std::vector<std::vector<double>> piecewise_stream(Rng& rng, int K, int T, int m) {
  std::vector<int> cuts;
  for (int i = 0; i < m; ++i) cuts.push_back(1 + static_cast<int>(rng.below(static_cast<std::size_t>(T - 1))));
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::vector<double>> out;
  int seg = 0, good = static_cast<int>(rng.below(static_cast<std::size_t>(K)));
  for (int t = 0; t < T; ++t) {
    while (seg < m && t == cuts[static_cast<std::size_t>(seg)]) {
      good = static_cast<int>(rng.below(static_cast<std::size_t>(K)));
      ++seg;
    }
    std::vector<double> l(static_cast<std::size_t>(K));
    for (int c = 0; c < K; ++c) l[static_cast<std::size_t>(c)] = c == good ? 0.4 * rng.uniform() : 0.3 + 0.7 * rng.uniform();
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

TEST_CASE("init_belief is uniform and validates alpha", "[adaptation]") {
  const auto b4 = init_belief(4, 0.5, 0.05);
  for (double w : b4.w) CHECK(w == 0.25);
  CHECK(init_belief(1, 0.5, 0.05).w == std::vector<double>{1.0});
  CHECK_THROWS_AS(init_belief(3, 0.5, 0.0), ContractViolation);
  CHECK_THROWS_AS(init_belief(3, 0.5, 1.0), ContractViolation);
  CHECK_THROWS_AS(init_belief(3, 0.0, 0.1), ContractViolation);
  CHECK_THROWS_AS(init_belief(0, 0.5, 0.1), ContractViolation);
}

TEST_CASE("fixed-share worked examples", "[adaptation]") {
  SECTION("equal losses leave uniform weights unchanged") {
    const auto b = fixed_share_update(init_belief(3, 0.7, 0.1), {1.3, 1.3, 1.3});
    for (double w : b.w) CHECK(w == Approx(1.0 / 3.0).margin(1e-12));
    // Without sharing any weight vector is a fixed point of equal losses.
    const auto h = fixed_share_update(raw_belief({0.2, 0.5, 0.3}, 0.7, 0.0), {1.3, 1.3, 1.3});
    CHECK(h.w[0] == Approx(0.2).margin(1e-12));
    CHECK(h.w[1] == Approx(0.5).margin(1e-12));
    CHECK(h.w[2] == Approx(0.3).margin(1e-12));
  }
  const double e = std::exp(1.0);
  SECTION("no sharing reduces to a two-expert softmax") {
    const auto b = fixed_share_update(raw_belief({0.5, 0.5}, 1.0, 0.0), {0.0, 1.0});
    CHECK(b.w[0] == Approx(e / (e + 1.0)).margin(1e-12));
    CHECK(b.w[1] == Approx(1.0 / (e + 1.0)).margin(1e-12));
    CHECK(b.w[0] == Approx(0.7311).margin(1e-4));
    CHECK(b.w[1] == Approx(0.2689).margin(1e-4));
  }
  SECTION("half sharing mixes toward uniform") {
    const auto b = fixed_share_update(raw_belief({0.5, 0.5}, 1.0, 0.5), {0.0, 1.0});
    CHECK(b.w[0] == Approx(0.5 * e / (e + 1.0) + 0.25).margin(1e-12));
    CHECK(b.w[1] == Approx(0.5 / (e + 1.0) + 0.25).margin(1e-12));
    CHECK(b.w[0] == Approx(0.6156).margin(1e-4));
    CHECK(b.w[1] == Approx(0.3844).margin(1e-4));
  }
}

TEST_CASE("fixed-share matches a textbook evaluation on random inputs", "[adaptation]") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const int K = 1 + static_cast<int>(rng.below(8));
    BeliefState b = init_belief(K, 0.1 + rng.uniform(), 0.01 + 0.9 * rng.uniform());
    for (int t = 0; t < 5; ++t) {
      const auto l = random_losses(rng, K);
      const auto expect = naive_share(b.w, l, b.eta, b.alpha);
      b = fixed_share_update(b, l);
      for (int c = 0; c < K; ++c) CHECK(b.w[static_cast<std::size_t>(c)] == Approx(expect[static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("fixed-share without sharing is bit-identical to Hedge", "[adaptation]") {
  Rng rng(5);
  for (int stream = 0; stream < 1000; ++stream) {
    const int K = 2 + static_cast<int>(rng.below(7));
    BeliefState fs = init_static_belief(K, 0.5), hedge = fs;
    REQUIRE(fs.alpha == 0.0);
    for (int t = 0; t < 20; ++t) {
      const auto l = random_losses(rng, K);
      fs = fixed_share_update(fs, l);
      hedge = hedge_update(hedge, l);
      REQUIRE(fs.w == hedge.w);
    }
  }
}

TEST_CASE("exploration floor and normalisation hold across random updates", "[adaptation]") {
  Rng rng(7);
  int violations = 0;
  double worst_norm = 0.0;
  BeliefState b = init_belief(4, 0.5, 0.05);
  for (int i = 0; i < 100000; ++i) {
    if (i % 1000 == 0) b = init_belief(2 + static_cast<int>(rng.below(7)), 0.1 + 2.0 * rng.uniform(), 0.001 + 0.5 * rng.uniform());
    b = fixed_share_update(b, random_losses(rng, b.size(), 40.0));
    const double floor = b.alpha / b.size();
    for (double w : b.w) violations += w < floor ? 1 : 0;
    worst_norm = std::max(worst_norm, std::abs(sum(b.w) - 1.0));
  }
  CHECK(violations == 0);
  CHECK(worst_norm <= 1e-9);
}

TEST_CASE("hedge decays a repeatedly losing expert monotonically", "[adaptation]") {
  BeliefState b = init_static_belief(3, 0.5);
  double prev = b.w[1];
  for (int t = 0; t < 100; ++t) {
    b = hedge_update(b, {0.0, 1.0, 0.0});
    CHECK(b.w[1] < prev);
    prev = b.w[1];
  }
  CHECK(prev < 1e-10);
}

TEST_CASE("after a switch, fixed-share recovers faster than Hedge", "[adaptation]") {
  const int T = 400;
  std::vector<std::vector<double>> stream;
  for (int t = 0; t < T; ++t) stream.push_back(t < T / 2 ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0});
  BeliefState fs = init_belief(2, 0.5, 0.05), hedge = init_static_belief(2, 0.5);
  double fs_phase2 = 0.0, hedge_phase2 = 0.0;
  for (int t = 0; t < T; ++t) {
    if (t >= T / 2) {
      fs_phase2 += mixture_loss(fs, stream[static_cast<std::size_t>(t)]);
      hedge_phase2 += mixture_loss(hedge, stream[static_cast<std::size_t>(t)]);
    }
    fs = fixed_share_update(fs, stream[static_cast<std::size_t>(t)]);
    hedge = hedge_update(hedge, stream[static_cast<std::size_t>(t)]);
    if (t + 1 == 250) CHECK(hedge.w[1] < fs.w[1]);
  }
  INFO("phase-2 loss fixed-share " << fs_phase2 << ", hedge " << hedge_phase2);
  CHECK(hedge_phase2 > fs_phase2);
}

TEST_CASE("tracking-regret bound holds on piecewise-constant streams", "[adaptation]") {
  Rng rng(11);
  int violations = 0, checked = 0;
  for (int K : {2, 4, 8})
    for (int m : {1, 3, 5})
      for (double alpha : {0.01, 0.05, 0.1})
        for (int rep = 0; rep < 3; ++rep) {
          const int T = 1000;
          const double eta = 0.5;
          const auto stream = piecewise_stream(rng, K, T, m);
          BeliefState b = init_belief(K, eta, alpha);
          double mix = 0.0;
          for (const auto& l : stream) {
            mix += mixture_loss(b, l);
            b = fixed_share_update(b, l);
          }
          const double regret = mix - best_partition_loss(stream, m);
          const double bound = tracking_regret_bound(K, T, m, eta, alpha);
          ++checked;
          if (regret > bound) {
            ++violations;
            UNSCOPED_INFO("K=" << K << " m=" << m << " alpha=" << alpha << " regret " << regret << " > bound " << bound);
          }
        }
  CHECK(checked == 81);
  CHECK(violations == 0);
}

TEST_CASE("best partition loss agrees with exhaustive search on tiny streams", "[adaptation]") {
  Rng rng(13);
  for (int rep = 0; rep < 30; ++rep) {
    const int K = 2 + static_cast<int>(rng.below(2)), T = 6, m = static_cast<int>(rng.below(3));
    std::vector<std::vector<double>> s;
    for (int t = 0; t < T; ++t) s.push_back(random_losses(rng, K, 1.0));
    double best = INFINITY;
    int total = 1;
    for (int t = 0; t < T; ++t) total *= K;
    for (int code = 0; code < total; ++code) {
      int x = code, prev = -1, switches = 0;
      double loss = 0.0;
      for (int t = 0; t < T; ++t) {
        const int c = x % K;
        x /= K;
        if (prev >= 0 && c != prev) ++switches;
        prev = c;
        loss += s[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
      }
      if (switches <= m) best = std::min(best, loss);
    }
    CHECK(best_partition_loss(s, m) == Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("leading expert is the argmax with low-id ties", "[adaptation]") {
  CHECK(leading_expert(raw_belief({0.2, 0.5, 0.3}, 0.5, 0.05)) == 1);
  CHECK(leading_expert(init_belief(4)) == 0);
  CHECK(leading_expert(raw_belief({0.4, 0.1, 0.4, 0.1}, 0.5, 0.05)) == 0);
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w(5);
    for (auto& x : w) x = rng.uniform();
    const double k = 0.01 + 100.0 * rng.uniform();
    std::vector<double> scaled = w;
    for (auto& x : scaled) x *= k;
    CHECK(leading_expert(raw_belief(w, 0.5, 0.05)) == leading_expert(raw_belief(scaled, 0.5, 0.05)));
  }
}

TEST_CASE("update preconditions are enforced", "[adaptation]") {
  const auto b = init_belief(3);
  CHECK_THROWS_AS(fixed_share_update(b, {0.1, 0.2}), ContractViolation);
  CHECK_THROWS_AS(fixed_share_update(b, {0.1, NAN, 0.2}), ContractViolation);
  CHECK_THROWS_AS(hedge_update(b, {0.1, 0.2, INFINITY}), ContractViolation);
}

namespace {

struct Fixture {
  std::shared_ptr<strategy::VaeModel<float>> dec;
  std::vector<strategy::StrategyCluster> clusters;
  std::shared_ptr<cooperator::CooperatorPolicy> pi;
};

Fixture small_fixture(int K) {
  Fixture f;
  strategy::VaeConfig vc;
  vc.latent_dim = 4;
  vc.window = 4;
  vc.enc_hidden = 8;
  vc.dec_hidden = 8;
  f.dec = std::make_shared<strategy::VaeModel<float>>();
  f.dec->init(vc, kitchen::kObservationSize, 3);
  Rng rng(5);
  for (int c = 0; c < K; ++c) {
    strategy::StrategyCluster s;
    s.id = c;
    s.mean = Eigen::VectorXd::NullaryExpr(vc.latent_dim, [&] { return rng.normal(); });
    s.variance = Eigen::VectorXd::Constant(vc.latent_dim, 0.1);
    s.count = 3;
    s.priority = 1.0 / K;
    f.clusters.push_back(s);
  }
  f.pi = std::make_shared<cooperator::CooperatorPolicy>();
  f.pi->init(kitchen::kObservationSize, f.clusters, {}, 9);
  return f;
}

}  // namespace

TEST_CASE("expert losses: uniform decoder and perfect expert", "[adaptation]") {
  auto f = small_fixture(3);
  const auto s = kitchen::load_layout("open", 1);
  const auto o = kitchen::observe(s, 1);
  f.dec->dec_out.W.value.setZero();
  f.dec->dec_out.b.value.setZero();
  for (double l : expert_losses(f.clusters, *f.dec, o, MacroAction::deliver, 4)) CHECK(l == Approx(std::log(10.0)).margin(1e-6));

  f.dec->dec_out.b.value(static_cast<int>(MacroAction::deliver)) = 60.0f;
  for (double l : expert_losses(f.clusters, *f.dec, o, MacroAction::deliver, 4)) CHECK(l == Approx(0.0).margin(1e-6));
  // The floor bounds the loss of an impossible action.
  for (double l : expert_losses(f.clusters, *f.dec, o, MacroAction::trash, 4)) CHECK(l <= -std::log(kProbabilityFloor) + 1e-9);
}

TEST_CASE("fixed latent scoring is deterministic across seeds", "[adaptation]") {
  auto f = small_fixture(3);
  const auto o = kitchen::observe(kitchen::load_layout("open", 1), 0);
  const auto a = expert_losses(f.clusters, *f.dec, o, MacroAction::pick_onion, 1, true);
  const auto b = expert_losses(f.clusters, *f.dec, o, MacroAction::pick_onion, 2, true);
  CHECK(a == b);
  const auto c = expert_losses(f.clusters, *f.dec, o, MacroAction::pick_onion, 1);
  const auto d = expert_losses(f.clusters, *f.dec, o, MacroAction::pick_onion, 2);
  CHECK(c != d);
}

TEST_CASE("adapt_step keeps the belief without evidence and updates it with evidence", "[adaptation]") {
  auto f = small_fixture(3);
  const auto s = kitchen::load_layout("open", 1);
  const auto in = cooperator::make_input(s, 0);
  Rng rng(1);
  const BeliefState b0 = init_belief(3);
  const auto r0 = adapt_step(b0, f.clusters, *f.dec, *f.pi, in, std::nullopt, rng);
  CHECK(r0.belief.w == b0.w);
  CHECK(r0.leader == 0);
  CHECK(static_cast<int>(r0.action) < kitchen::kNumPrimitiveActions);

  const PartnerEvidence ev{MacroAction::pick_plate, kitchen::observe(s, 1)};
  BeliefState b = b0;
  for (int t = 0; t < 50; ++t) {
    const auto r = adapt_step(b, f.clusters, *f.dec, *f.pi, in, ev, rng);
    REQUIRE(r.losses.size() == 3);
    CHECK(std::abs(sum(r.belief.w) - 1.0) <= 1e-9);
    for (double w : r.belief.w) CHECK(w >= b.alpha / 3 - 1e-15);
    b = r.belief;
  }
  CHECK(b.w != b0.w);
}

TEST_CASE("adapt_step rejects mismatched components", "[adaptation]") {
  auto f = small_fixture(3);
  auto other = small_fixture(2);
  const auto in = cooperator::make_input(kitchen::load_layout("open", 1), 0);
  Rng rng(1);
  CHECK_THROWS_AS(adapt_step(init_belief(2), other.clusters, *f.dec, *f.pi, in, std::nullopt, rng), ConfigError);
  CHECK_THROWS_AS(TalentsAgent(f.pi, other.clusters, f.dec, {}), ConfigError);
  CHECK_THROWS_AS(adapt_step(init_belief(2), f.clusters, *f.dec, *f.pi, in, std::nullopt, rng), ContractViolation);
}

TEST_CASE("talents agent keeps a normalised belief trace over an episode", "[adaptation]") {
  auto f = small_fixture(3);
  TalentsAgent agent(f.pi, f.clusters, f.dec, {});
  auto pop = partners::make_population(3, 2);
  partners::ScriptedPolicy partner = pop[0].policy;
  const auto t = partners::play_episode(agent, partner, kitchen::builtin_layout("open"), 3);
  REQUIRE(agent.trace().size() == t.steps.size());
  int updates = 0;
  for (const auto& r : agent.trace()) {
    CHECK(std::abs(sum(r.w) - 1.0) <= 1e-9);
    updates += r.losses.empty() ? 0 : 1;
  }
  // One update per completed partner macro (the last one may land after the final act).
  CHECK(updates >= static_cast<int>(t.labels[1].size()) - 1);
  CHECK(updates <= static_cast<int>(t.labels[1].size()));
}
