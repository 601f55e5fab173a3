#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "support.hpp"
#include "talents/partners/dataset.hpp"

using namespace talents;
using namespace talents::kitchen;
using namespace talents::partners;
namespace fs = std::filesystem;

namespace {

std::vector<ScriptedPolicy> policies_of(const std::vector<PopulationMember>& pop) {
  std::vector<ScriptedPolicy> out;
  for (const auto& m : pop) out.push_back(m.policy);
  return out;
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("talents_partners_" + name);
  fs::remove_all(p);
  return p;
}

std::array<double, kNumMacroActions> label_histogram(const std::vector<MacroLabel>& labels) {
  std::array<double, kNumMacroActions> h{};
  for (const auto& l : labels) h[static_cast<std::size_t>(l.action)] += 1.0;
  return h;
}

}  // namespace

TEST_CASE("population size and stratification", "[partners]") {
  CHECK_THROWS_AS(make_population(1, 0), ConfigError);
  CHECK_THROWS_AS(make_population(kPopulationGridSize + 1, 0), ConfigError);
  for (int n = 2; n <= kPopulationGridSize; ++n) {
    const auto pop = make_population(n, 5);
    REQUIRE(static_cast<int>(pop.size()) == n);
    const int need = (n + 3) / 4;
    for (int k = 0; k < kNumStationKinds; ++k) {
      int count = 0;
      for (const auto& m : pop) count += emphasizes(m.policy.preference(), static_cast<StationKind>(k)) ? 1 : 0;
      INFO("n=" << n << " station=" << k);
      CHECK(count >= need);
    }
  }
}

TEST_CASE("twelve policies have distinct valid weights and are reproducible", "[partners]") {
  const auto a = make_population(12, 42);
  const auto b = make_population(12, 42);
  REQUIRE(a.size() == 12);
  std::set<ShapingWeights> distinct;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& w = a[i].policy.preference().weights;
    distinct.insert(w);
    CHECK_NOTHROW(a[i].policy.preference().validate());
    CHECK(w == b[i].policy.preference().weights);
    CHECK(a[i].policy.preference().style == b[i].policy.preference().style);
    CHECK(a[i].policy.id() == b[i].policy.id());
  }
  CHECK(distinct.size() == 12);
  CHECK(make_population(12, 43)[0].policy.preference().weights != a[0].policy.preference().weights);
}

TEST_CASE("behavior preference validation", "[partners]") {
  BehaviorPreference p;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.weights[0] = std::nan("");
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.weights[0] = 1.0;
  CHECK_NOTHROW(p.validate());
  p.competence_noise = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("scripted policy is legal and a function of state and seed", "[partners]") {
  const auto pop = make_population(6, 3);
  Rng rng(9);
  for (const auto name : layout_names()) {
    GameState s = load_layout(name, 17);
    for (int t = 0; t < 300; ++t) {
      for (const auto& m : pop) {
        auto noisy = m.policy.with_noise(0.3);
        for (int seat = 0; seat < 2; ++seat) {
          const auto a1 = noisy.act(s, seat);
          const auto a2 = noisy.act(s, seat);
          const int ai = static_cast<int>(a1);
          REQUIRE(ai >= 0);
          REQUIRE(ai < kNumPrimitiveActions);
          REQUIRE(a1 == a2);
        }
      }
      s = step(s, testing::random_joint(rng)).state;
    }
  }
}

TEST_CASE("population shows behavioral diversity", "[partners]") {
  const auto pop = make_population(12, 11);
  const auto layout = builtin_layout("open");
  // Each policy plays 10 episodes in seat 0 against a rotating population
  // partner; its own macro-label histogram is the behavioral fingerprint.
  std::vector<std::array<double, kNumMacroActions>> hist;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    std::array<double, kNumMacroActions> h{};
    double total = 0.0;
    for (int e = 0; e < 10; ++e) {
      ScriptedPolicy me = pop[i].policy;
      ScriptedPolicy partner = pop[static_cast<std::size_t>(e) % pop.size()].policy;
      EpisodeOptions opt;
      opt.record = false;
      const auto t = play_episode(me, partner, layout, derive_seed(77, static_cast<std::uint64_t>(e)), opt);
      const auto hh = label_histogram(t.labels[0]);
      for (int k = 0; k < kNumMacroActions; ++k) {
        h[static_cast<std::size_t>(k)] += hh[static_cast<std::size_t>(k)];
        total += hh[static_cast<std::size_t>(k)];
      }
    }
    REQUIRE(total > 0.0);
    for (auto& v : h) v /= total;
    hist.push_back(h);
  }
  for (std::size_t i = 0; i < hist.size(); ++i)
    for (std::size_t j = i + 1; j < hist.size(); ++j) {
      double l1 = 0.0;
      for (int k = 0; k < kNumMacroActions; ++k)
        l1 += std::abs(hist[i][static_cast<std::size_t>(k)] - hist[j][static_cast<std::size_t>(k)]);
      INFO(i << " vs " << j);
      CHECK(l1 > 0.0);
    }
}

TEST_CASE("collect_rollouts covers every pair and replays exactly", "[partners]") {
  const auto dir = scratch_dir("pairs");
  const auto pols = policies_of(make_population(3, 1));
  CollectOptions opt;
  opt.out_dir = dir.string();
  opt.episode_length = 200;
  const Dataset d = collect_rollouts(pols, {"open"}, 1, 99, opt);
  CHECK(d.size() == 6);  // 3 choose 2 + 3 self-pairs

  std::multiset<std::set<std::string>> pairs;
  for (const auto& e : d.entries) {
    REQUIRE(fs::exists(d.path(e)));
    pairs.insert({e.seats[0], e.seats[1]});
    const Trajectory t = d.load(e);
    CHECK(t.policy_ids == e.seats);
    CHECK(t.score == e.score);
    CHECK(static_cast<int>(t.steps.size()) <= t.episode_length);
    std::string why;
    CHECK(replay_matches(t, &why));
    INFO(why);
    CHECK(label_macro_actions(t) == t.labels);
  }
  CHECK(pairs.size() == 6);
  CHECK(pairs.count({"bp00"}) == 1);
  CHECK(pairs.count({"bp00", "bp02"}) == 1);

  const Dataset again = load_dataset(dir.string());
  CHECK(again.entries == d.entries);

  // Same seed, same index.
  const auto dir2 = scratch_dir("pairs2");
  opt.out_dir = dir2.string();
  CHECK(collect_rollouts(pols, {"open"}, 1, 99, opt).entries == d.entries);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("dataset labels differ by source policy and cover the vocabulary", "[partners]") {
  const auto dir = scratch_dir("labels");
  const auto pols = policies_of(make_population(12, 5));
  CollectOptions opt;
  opt.out_dir = dir.string();
  std::vector<std::string> layouts(layout_names().begin(), layout_names().end());
  const Dataset d = collect_rollouts(pols, layouts, 1, 2024, opt);
  CHECK(d.size() == layouts.size() * (12 * 11 / 2 + 12));

  // Contingency table of (source policy, macro label) counts.
  std::map<std::string, std::array<double, kNumMacroActions>> table;
  std::map<std::string, std::set<int>> seen_per_layout;
  for (const auto& e : d.entries) {
    const Trajectory t = d.load(e);
    for (int p = 0; p < 2; ++p)
      for (const auto& l : t.labels[static_cast<std::size_t>(p)]) {
        table[t.policy_ids[static_cast<std::size_t>(p)]][static_cast<std::size_t>(l.action)] += 1.0;
        seen_per_layout[e.layout].insert(static_cast<int>(l.action));
      }
  }
  for (const auto& name : layouts) {
    INFO(name);
    CHECK(seen_per_layout[name].size() == static_cast<std::size_t>(kNumMacroActions));
  }

  std::array<double, kNumMacroActions> col{};
  double total = 0.0;
  for (const auto& [id, row] : table)
    for (int k = 0; k < kNumMacroActions; ++k) {
      col[static_cast<std::size_t>(k)] += row[static_cast<std::size_t>(k)];
      total += row[static_cast<std::size_t>(k)];
    }
  double chi2 = 0.0;
  int used_cols = 0;
  for (int k = 0; k < kNumMacroActions; ++k) {
    if (col[static_cast<std::size_t>(k)] == 0.0) continue;
    ++used_cols;
    for (const auto& [id, row] : table) {
      double rs = 0.0;
      for (double v : row) rs += v;
      const double expected = rs * col[static_cast<std::size_t>(k)] / total;
      const double diff = row[static_cast<std::size_t>(k)] - expected;
      chi2 += diff * diff / expected;
    }
  }
  const double df = static_cast<double>((table.size() - 1) * static_cast<std::size_t>(used_cols - 1));
  const double critical = boost::math::quantile(boost::math::chi_squared(df), 0.95);
  INFO("chi2=" << chi2 << " critical=" << critical);
  CHECK(chi2 > critical);
  fs::remove_all(dir);
}

TEST_CASE("write failure cleans up partial output", "[partners]") {
  const auto dir = scratch_dir("fail");
  const auto pols = policies_of(make_population(3, 1));
  CollectOptions opt;
  opt.out_dir = dir.string();
  opt.episode_length = 50;
  int calls = 0;
  opt.writer = [&](const std::string& path, const Trajectory& t) {
    if (++calls == 3) throw IoError("disk full");
    save_trajectory(path, t);
  };
  CHECK_THROWS_AS(collect_rollouts(pols, {"open"}, 1, 5, opt), IoError);
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) files += e.is_regular_file() ? 1 : 0;
  CHECK(files == 0);

  // Unwritable destination.
  const auto blocker = scratch_dir("blocker");
  std::ofstream(blocker.string()) << "x";
  opt.writer = save_trajectory;
  opt.out_dir = (blocker / "sub").string();
  CHECK_THROWS_AS(collect_rollouts(pols, {"open"}, 1, 5, opt), IoError);
  fs::remove_all(dir);
  fs::remove(blocker);
}

TEST_CASE("holdout split hygiene", "[partners]") {
  const auto dir = scratch_dir("split");
  const auto pols = policies_of(make_population(12, 8));
  CollectOptions opt;
  opt.out_dir = dir.string();
  opt.episode_length = 40;
  const Dataset d = collect_rollouts(pols, {"open"}, 1, 3, opt);

  auto [train0, hold0] = holdout_split(d, {});
  CHECK(hold0.entries.empty());
  CHECK(train0.entries == d.entries);

  std::vector<std::string> all;
  for (const auto& p : pols) all.push_back(p.id());
  CHECK_THROWS_AS(holdout_split(d, all), ConfigError);
  CHECK_THROWS_AS(holdout_split(d, {"nobody"}), ConfigError);

  const std::vector<std::string> held_ids = {"bp01", "bp05", "bp10"};
  auto [train, hold] = holdout_split(d, held_ids);
  CHECK(train.size() + hold.size() == d.size());
  CHECK(train.size() == 9 * 8 / 2 + 9);
  // Audit the files themselves: no train file header mentions a holdout id.
  for (const auto& e : train.entries) {
    std::ifstream f(train.path(e));
    std::string magic, header;
    std::getline(f, magic);
    std::getline(f, header);
    for (const auto& id : held_ids) {
      INFO(e.file << " " << id);
      CHECK(header.find("seat0=" + id + " ") == std::string::npos);
      CHECK(header.find("seat1=" + id) == std::string::npos);
      CHECK(e.file.find(id) == std::string::npos);
    }
  }
  for (const auto& e : hold.entries) {
    const bool has = std::find(held_ids.begin(), held_ids.end(), e.seats[0]) != held_ids.end() ||
                     std::find(held_ids.begin(), held_ids.end(), e.seats[1]) != held_ids.end();
    CHECK(has);
  }
  fs::remove_all(dir);
}

TEST_CASE("macro executor completes feasible macros", "[partners]") {
  GameState s = load_layout("open", 4);
  const auto ok = feasible_macros(s, 0);
  CHECK(ok[static_cast<std::size_t>(MacroAction::idle)]);
  CHECK(ok[static_cast<std::size_t>(MacroAction::pick_onion)]);
  CHECK_FALSE(ok[static_cast<std::size_t>(MacroAction::deliver)]);  // nothing to deliver

  MacroExecutor ex;
  ex.start(MacroAction::pick_onion);
  bool done = false;
  for (int t = 0; t < 40 && !done; ++t) {
    const auto a = ex.act(s, 0, 1);
    auto r = step(s, {a, PrimitiveAction::stay});
    ex.observe(r.events, 0);
    for (const auto& e : r.events) done = done || (e.player == 0 && e.kind == EventKind::pickup_ingredient);
    s = r.state;
  }
  CHECK(done);
  CHECK_FALSE(ex.busy());
  CHECK(s.players[0].held == Item::onion);
  // Now loading is feasible and picking another ingredient is not.
  const auto ok2 = feasible_macros(s, 0);
  CHECK(ok2[static_cast<std::size_t>(MacroAction::load_station)]);
  CHECK_FALSE(ok2[static_cast<std::size_t>(MacroAction::pick_rice)]);

  ex.start(MacroAction::deliver);  // infeasible: clears itself
  CHECK(ex.act(s, 0, 1) == PrimitiveAction::stay);
  CHECK_FALSE(ex.busy());

  ex.start(MacroAction::idle);
  for (int i = 0; i < MacroExecutor::kIdleTicks; ++i) CHECK(ex.act(s, 0, 1) == PrimitiveAction::stay);
  CHECK_FALSE(ex.busy());
}

TEST_CASE("forced_coord pairs hand off through the shared counters", "[partners]") {
  const auto pop = make_population(3, 2);
  const auto layout = builtin_layout("forced_coord");
  // Soup specialist on the ingredient side, service partner on the stove side.
  ScriptedPolicy a = pop[0].policy, b = pop[2].policy;
  const auto t = play_episode(a, b, layout, 12);
  int exchanges = 0;
  for (const auto& st : t.steps)
    for (const auto& e : st.events) exchanges += e.kind == EventKind::counter_place || e.kind == EventKind::counter_pick;
  CHECK(exchanges > 0);
  CHECK(t.score > 0);

  // Alone, neither side completes a dish.
  IdleAgent idle;
  CHECK(play_episode(a, idle, layout, 12).score == 0);
  CHECK(play_episode(idle, b, layout, 12).score == 0);
}
