#include <catch_amalgamated.hpp>

#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "support.hpp"
#include "talents/kitchen/layout.hpp"
#include "talents/kitchen/macro.hpp"
#include "talents/kitchen/observe.hpp"
#include "talents/kitchen/trajectory.hpp"

using namespace talents;
using namespace talents::kitchen;
using talents::testing::walk_and_interact;

namespace {

Coord find_tile(const Layout& L, TileKind kind) {
  for (int i = 0; i < L.width * L.height; ++i)
    if (L.at(L.coord(i)).kind == kind) return L.coord(i);
  return {-1, -1};
}

Coord station_pos(const GameState& s, StationKind k) {
  for (const auto& st : s.stations)
    if (st.kind == k) return st.position;
  return {-1, -1};
}

Coord source_pos(const Layout& L, Ingredient g) {
  for (int i = 0; i < L.width * L.height; ++i) {
    const Tile& t = L.at(L.coord(i));
    if (t.kind == TileKind::ingredient_source && t.ingredient == g) return L.coord(i);
  }
  return {-1, -1};
}

// Independent reachability oracle: plain 4-neighbour flood fill over floor glyphs.
std::set<std::pair<int, int>> flood(const std::vector<std::string>& rows, int sx, int sy) {
  std::set<std::pair<int, int>> seen;
  std::deque<std::pair<int, int>> q{{sx, sy}};
  seen.insert({sx, sy});
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (ny < 0 || ny >= static_cast<int>(rows.size()) || nx < 0 || nx >= static_cast<int>(rows[0].size())) continue;
      const char c = rows[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)];
      if ((c == ' ' || c == '1' || c == '2') && seen.insert({nx, ny}).second) q.push_back({nx, ny});
    }
  }
  return seen;
}

std::vector<std::string> grid_rows(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> rows;
  bool grid = false;
  while (std::getline(in, line)) {
    if (line == "grid") grid = true;
    else if (line == "end") grid = false;
    else if (grid) rows.push_back(line);
  }
  return rows;
}

// Chars adjacent to a region, i.e. what its occupant can interact with.
std::set<char> reachable_glyphs(const std::vector<std::string>& rows, const std::set<std::pair<int, int>>& region) {
  std::set<char> out;
  for (auto [x, y] : region) {
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) out.insert(rows[static_cast<std::size_t>(y + dy[k])][static_cast<std::size_t>(x + dx[k])]);
  }
  return out;
}

GameState random_rollout(const std::string& layout, std::uint64_t seed, int ticks, Rng& rng) {
  GameState s = load_layout(layout, seed);
  for (int t = 0; t < ticks && !s.terminal(); ++t) s = step(s, talents::testing::random_joint(rng)).state;
  return s;
}

}  // namespace

TEST_CASE("load_layout: every built-in layout has two players, three stations and orders") {
  for (auto name : layout_names()) {
    GameState s = load_layout(name, 7);
    CHECK(s.players.size() == 2);
    CHECK(s.players[0].position != s.players[1].position);
    CHECK(s.stations.size() == 3);
    CHECK_FALSE(s.orders.empty());
    for (const auto& st : s.stations) CHECK(s.layout->at(st.position).kind == TileKind::station_slot);
    const Layout& L = *s.layout;
    for (int x = 0; x < L.width; ++x) {
      CHECK_FALSE(L.at({x, 0}).walkable());
      CHECK_FALSE(L.at({x, L.height - 1}).walkable());
    }
    for (int y = 0; y < L.height; ++y) {
      CHECK_FALSE(L.at({0, y}).walkable());
      CHECK_FALSE(L.at({L.width - 1, y}).walkable());
    }
  }
}

TEST_CASE("load_layout: same seed gives identical states, unknown id is a config error") {
  CHECK(load_layout("ring", 42) == load_layout("ring", 42));
  CHECK(state_digest(load_layout("ring", 42)) == state_digest(load_layout("ring", 42)));
  CHECK_THROWS_AS(load_layout("kitchen_of_doom", 1), ConfigError);
}

TEST_CASE("load_layout: forced_coord separates the players (flood-fill oracle)") {
  const auto rows = grid_rows(kLayoutForcedCoord);
  int x1 = -1, y1 = -1, x2 = -1, y2 = -1;
  for (int y = 0; y < static_cast<int>(rows.size()); ++y)
    for (int x = 0; x < static_cast<int>(rows[0].size()); ++x) {
      if (rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '1') x1 = x, y1 = y;
      if (rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '2') x2 = x, y2 = y;
    }
  const auto left = flood(rows, x1, y1);
  const auto right = flood(rows, x2, y2);
  CHECK(left.count({x2, y2}) == 0);
  CHECK(right.count({x1, y1}) == 0);
  // Neither side can complete a dish alone.
  const auto lg = reachable_glyphs(rows, left);
  const auto rg = reachable_glyphs(rows, right);
  CHECK(lg.count('S') == 0);
  CHECK(lg.count('P') + lg.count('C') + lg.count('G') == 0);
  CHECK(rg.count('O') + rg.count('R') + rg.count('M') == 0);
  CHECK(rg.count('D') == 0);
  // The other layouts connect both starts.
  for (auto name : {"open", "hallway", "ring"}) {
    const auto r = grid_rows(builtin_layout_text(name));
    const LayoutPtr L = builtin_layout(name);
    const auto reg = flood(r, L->starts[0].x, L->starts[0].y);
    CHECK(reg.count({L->starts[1].x, L->starts[1].y}) == 1);
  }
}

TEST_CASE("layout files on disk match the built-in layouts") {
  for (auto name : layout_names()) {
    const LayoutPtr file = load_layout_file(talents::testing::source_path("layouts/" + std::string(name) + ".layout"));
    CHECK(file->version == builtin_layout(name)->version);
  }
}

TEST_CASE("parse_layout rejects malformed input") {
  CHECK_THROWS_AS(parse_layout(""), FormatError);
  CHECK_THROWS_AS(parse_layout("talents-layout 2\nname x\ngrid\nXXX\nend\n"), FormatError);
  // Floor on the boundary.
  CHECK_THROWS_AS(parse_layout("talents-layout 1\nname x\ngrid\nXPCG\n 12X\nXXXX\nend\n"), FormatError);
  // Missing stations.
  CHECK_THROWS_AS(parse_layout("talents-layout 1\nname x\ngrid\nXXXX\nX12X\nXXXX\nend\n"), FormatError);
}

TEST_CASE("step: both players stay leaves positions and decrements every timer") {
  GameState s = load_layout("open", 3);
  // Start the rice cooker so a station timer is running as well.
  walk_and_interact(s, 0, source_pos(*s.layout, Ingredient::rice));
  walk_and_interact(s, 0, station_pos(s, StationKind::rice_cooker));
  REQUIRE(s.stations[1].phase == StationPhase::cooking);
  const GameState before = s;
  auto r = step(s, {PrimitiveAction::stay, PrimitiveAction::stay});
  CHECK(r.state.players[0].position == before.players[0].position);
  CHECK(r.state.players[1].position == before.players[1].position);
  CHECK(r.state.stations[1].cook_timer == before.stations[1].cook_timer - 1);
  REQUIRE(r.state.orders.size() >= before.orders.size());
  for (std::size_t i = 0; i < before.orders.size(); ++i)
    CHECK(r.state.orders[i].time_remaining == before.orders[i].time_remaining - 1);
  CHECK(r.reward[0] == 0);
  CHECK(r.reward[1] == 0);
}

TEST_CASE("step: delivery inside the bonus window pays base + bonus to both players") {
  GameState s = load_layout("open", 5);
  const Coord window = find_tile(*s.layout, TileKind::delivery_window);
  s.orders.clear();
  Order o{99, Recipe::soup, 290, 300, 150, 20, 10};
  s.orders.push_back(o);
  s.players[0].held = Item::soup_dish;
  auto ev = walk_and_interact(s, 0, window);
  REQUIRE_FALSE(ev.empty());
  CHECK(ev.back().kind == EventKind::deliver);
  CHECK(ev.back().value == 30);
  CHECK(s.score == 30);

  // Outside the bonus window only the base reward is paid.
  GameState late = load_layout("open", 5);
  late.orders = {Order{1, Recipe::rice_dish, 100, 300, 150, 20, 10}};
  late.players[0].held = Item::rice_dish;
  const int before = late.score;
  auto ev2 = walk_and_interact(late, 0, window);
  REQUIRE_FALSE(ev2.empty());
  CHECK(ev2.back().value == 20);
  CHECK(late.score - before == 20);
}

TEST_CASE("step: reward is shared, delivery credited to both seats") {
  GameState s = load_layout("open", 5);
  s.orders = {Order{3, Recipe::soup, 250, 300, 150, 20, 10}};
  s.players[1].held = Item::soup_dish;
  const Coord window = find_tile(*s.layout, TileKind::delivery_window);
  for (int i = 0; i < 60; ++i) {
    const auto st = astar_step(*s.layout, s.players[1], {window});
    auto r = step(s, {PrimitiveAction::stay, st.action});
    CHECK(r.reward[0] == r.reward[1]);
    s = r.state;
    if (st.action == PrimitiveAction::interact) {
      CHECK(r.reward[0] == 30);
      break;
    }
  }
  CHECK(s.deliveries == 1);
}

TEST_CASE("step: station burn follows the idle-cooking-ready-burnt state machine (trace oracle)") {
  GameState s = load_layout("open", 11);
  s.players[1].position = {4, 3};  // keep the partner off the access cells used below
  const Layout& L = *s.layout;
  walk_and_interact(s, 0, source_pos(L, Ingredient::protein));
  REQUIRE(s.players[0].held == Item::protein);
  auto ev = walk_and_interact(s, 0, station_pos(s, StationKind::grill));
  REQUIRE(s.stations[2].phase == StationPhase::cooking);
  const int load_tick = s.tick - 1;  // tick on which the interact happened

  // Oracle: phase as a function of ticks elapsed since loading.
  const int cook = L.cook_ticks[static_cast<std::size_t>(StationKind::grill)];
  const int burn = L.burn_window;
  auto oracle = [&](int after_tick) {
    const int elapsed = after_tick - load_tick;  // number of completed tick updates
    if (elapsed < cook) return StationPhase::cooking;
    if (elapsed < cook + burn) return StationPhase::ready;
    return StationPhase::burnt;
  };
  std::vector<StationPhase> seen;
  while (s.tick < load_tick + cook + burn + 5) {
    s = step(s, {PrimitiveAction::stay, PrimitiveAction::stay}).state;
    CHECK(s.stations[2].phase == oracle(s.tick - 1 + 1));
    if (seen.empty() || seen.back() != s.stations[2].phase) seen.push_back(s.stations[2].phase);
  }
  CHECK(seen == std::vector<StationPhase>{StationPhase::cooking, StationPhase::ready, StationPhase::burnt});

  // A plate cannot take burnt food; empty hands scrape it out, and only the trash accepts it.
  s.players[0].held = Item::plate;
  auto ev_plate = walk_and_interact(s, 0, station_pos(s, StationKind::grill));
  REQUIRE_FALSE(ev_plate.empty());
  CHECK(ev_plate.back().kind == EventKind::illegal_interact);
  s.players[0].held = Item::none;
  auto ev_scrape = walk_and_interact(s, 0, station_pos(s, StationKind::grill));
  REQUIRE_FALSE(ev_scrape.empty());
  CHECK(ev_scrape.back().kind == EventKind::pickup_burnt);
  CHECK(s.players[0].held == Item::burnt);
  CHECK(s.stations[2].phase == StationPhase::idle);
  auto ev_window = walk_and_interact(s, 0, find_tile(L, TileKind::delivery_window));
  REQUIRE_FALSE(ev_window.empty());
  CHECK(ev_window.back().kind == EventKind::illegal_interact);
  auto ev_trash = walk_and_interact(s, 0, find_tile(L, TileKind::trash));
  REQUIRE_FALSE(ev_trash.empty());
  CHECK(ev_trash.back().kind == EventKind::trash);
  CHECK(s.players[0].held == Item::none);
}

TEST_CASE("step: contested tile goes to player 0, swaps are forbidden") {
  GameState s = load_layout("open", 1);
  s.players[0].position = {3, 2};
  s.players[1].position = {5, 2};
  auto r = step(s, {PrimitiveAction::right, PrimitiveAction::left});
  CHECK(r.state.players[0].position == Coord{4, 2});
  CHECK(r.state.players[1].position == Coord{5, 2});

  s.players[0].position = {3, 2};
  s.players[1].position = {4, 2};
  r = step(s, {PrimitiveAction::right, PrimitiveAction::left});
  CHECK(r.state.players[0].position == Coord{3, 2});
  CHECK(r.state.players[1].position == Coord{4, 2});

  // Following into a vacated tile is allowed.
  r = step(s, {PrimitiveAction::right, PrimitiveAction::right});
  CHECK(r.state.players[0].position == Coord{4, 2});
  CHECK(r.state.players[1].position == Coord{5, 2});

  // Moving into a partner that stays is blocked.
  r = step(s, {PrimitiveAction::right, PrimitiveAction::stay});
  CHECK(r.state.players[0].position == Coord{3, 2});
}

TEST_CASE("observe: pure, in range, fixed length") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const auto name = std::string(layout_names()[i % 4]);
    GameState s = random_rollout(name, static_cast<std::uint64_t>(i), static_cast<int>(rng.below(400)), rng);
    for (int p = 0; p < 2; ++p) {
      const auto v = observe(s, p);
      REQUIRE(v.size() == static_cast<std::size_t>(kObservationSize));
      for (double x : v) REQUIRE((x >= -1.0 && x <= 1.0));
      for (int k = 0; k < obs::kOrderSlots; ++k) {
        const double urgency = v[static_cast<std::size_t>(obs::kOrders + 5 * k + 3)];
        REQUIRE((urgency >= -1.0 && urgency <= 1.0));
      }
    }
    if (i % 50 == 0) CHECK(observe(s, 0) == observe(s, 0));
  }
  CHECK_THROWS_AS(observe(load_layout("open"), 2), ContractViolation);
}

TEST_CASE("observe: swapping player indices swaps ego and partner blocks") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    GameState s = random_rollout("ring", static_cast<std::uint64_t>(i), static_cast<int>(rng.below(300)), rng);
    // Reference: the same world with seats exchanged.
    GameState swapped = s;
    std::swap(swapped.players[0], swapped.players[1]);
    const auto a0 = observe(s, 0), a1 = observe(s, 1);
    CHECK(a0 == observe(swapped, 1));
    CHECK(a1 == observe(swapped, 0));
    for (int k = 0; k < obs::kPoseSize; ++k) {
      CHECK(a0[static_cast<std::size_t>(obs::kOwnPose + k)] == a1[static_cast<std::size_t>(obs::kPartnerPose + k)]);
      CHECK(a1[static_cast<std::size_t>(obs::kOwnPose + k)] == a0[static_cast<std::size_t>(obs::kPartnerPose + k)]);
    }
  }
}

TEST_CASE("invariants over random rollouts: determinism, shared reward, conservation, timers, score") {
  Rng meta(99);
  for (int run = 0; run < 40; ++run) {
    const auto name = std::string(layout_names()[static_cast<std::size_t>(run % 4)]);
    const std::uint64_t seed = meta.next();
    std::vector<JointAction> actions;
    Rng rng(seed);
    GameState s = load_layout(name, seed);
    for (int t = 0; t < s.episode_length; ++t) actions.push_back(talents::testing::random_joint(rng));

    std::vector<std::uint64_t> trace_a, trace_b;
    int delivered = 0;
    for (int rep = 0; rep < 2; ++rep) {
      GameState g = load_layout(name, seed);
      auto& trace = rep == 0 ? trace_a : trace_b;
      for (const auto& ja : actions) {
        const GameState before = g;
        auto r = step(g, ja);
        trace.push_back(state_digest(r.state));
        if (rep == 1) {
          g = r.state;
          continue;
        }
        CHECK(r.reward[0] == r.reward[1]);
        CHECK(r.state.score >= before.score);
        CHECK(r.state.players[0].position != r.state.players[1].position);
        int mass_delta = 0;
        for (const Event& e : r.events) {
          if (e.kind == EventKind::pickup_ingredient || e.kind == EventKind::pickup_plate) mass_delta += 1;
          if (e.kind == EventKind::deliver || e.kind == EventKind::deliver_unmatched || e.kind == EventKind::trash)
            mass_delta -= item_units(e.item);
          if (e.kind == EventKind::deliver) delivered += e.value;
        }
        CHECK(item_mass(r.state) - item_mass(before) == mass_delta);
        for (const Order& o : r.state.orders) {
          CHECK(o.time_remaining >= 0);
          for (const Order& ob : before.orders)
            if (ob.id == o.id) CHECK(o.time_remaining == ob.time_remaining - 1);
        }
        g = r.state;
      }
      if (rep == 0) CHECK(g.score == delivered);
    }
    CHECK(trace_a == trace_b);
  }
}

TEST_CASE("label_macro_actions: plate pickup, idle-only and event-log replay oracle") {
  // Plate pickup labels pick_plate at the interacting tick.
  {
    GameState s = load_layout("open", 2);
    Trajectory t;
    t.layout = "open";
    t.layout_version = s.layout->version;
    t.seed = 2;
    t.episode_length = s.episode_length;
    const Coord plates = find_tile(*s.layout, TileKind::plate_stack);
    int pick_tick = -1;
    for (int i = 0; i < 40; ++i) {
      const auto st = astar_step(*s.layout, s.players[0], {plates});
      TrajectoryStep ts;
      ts.tick = s.tick;
      ts.actions = {st.action, PrimitiveAction::left};
      auto r = step(s, ts.actions);
      ts.events = r.events;
      t.steps.push_back(ts);
      for (const auto& e : r.events)
        if (e.kind == EventKind::pickup_plate) pick_tick = ts.tick;
      s = r.state;
      if (pick_tick >= 0) break;
    }
    REQUIRE(pick_tick >= 0);
    const auto labels = label_macro_actions(t);
    REQUIRE_FALSE(labels[0].empty());
    CHECK(labels[0].back() == MacroLabel{pick_tick, MacroAction::pick_plate});
  }
  // No interacts at all: only idle labels.
  {
    Trajectory t;
    t.layout = "hallway";
    t.layout_version = builtin_layout("hallway")->version;
    t.seed = 4;
    t.episode_length = 400;
    for (int i = 0; i < 200; ++i) {
      TrajectoryStep ts;
      ts.tick = i;
      ts.actions = {i % 40 < 5 ? PrimitiveAction::right : PrimitiveAction::stay, PrimitiveAction::stay};
      t.steps.push_back(ts);
    }
    const auto labels = label_macro_actions(t);
    for (int p = 0; p < 2; ++p) {
      CHECK_FALSE(labels[static_cast<std::size_t>(p)].empty());
      for (const auto& l : labels[static_cast<std::size_t>(p)]) CHECK(l.action == MacroAction::idle);
    }
  }
  // Random 400-tick rollouts: labels equal an independent mapping of the recorded event log.
  Rng rng(1234);
  for (int run = 0; run < 20; ++run) {
    const auto name = std::string(layout_names()[static_cast<std::size_t>(run % 4)]);
    GameState s = load_layout(name, static_cast<std::uint64_t>(run));
    Trajectory t;
    t.layout = name;
    t.layout_version = s.layout->version;
    t.seed = static_cast<std::uint64_t>(run);
    t.episode_length = s.episode_length;
    while (!s.terminal()) {
      TrajectoryStep ts;
      ts.tick = s.tick;
      // Bias toward interacting so pickups and counter exchanges happen.
      ts.actions = talents::testing::random_joint(rng);
      if (rng.uniform() < 0.3) ts.actions[0] = PrimitiveAction::interact;
      auto r = step(s, ts.actions);
      ts.events = r.events;
      t.steps.push_back(ts);
      s = r.state;
    }
    // Oracle: walk the log; completed player events map by kind; idle = 12
    // consecutive ticks with no completed event and no position change, where
    // position change is inferred from the recorded moves replayed on a copy.
    std::array<std::vector<MacroLabel>, 2> expect;
    std::array<int, 2> still{0, 0};
    GameState g = load_layout(name, static_cast<std::uint64_t>(run));
    for (const auto& ts : t.steps) {
      const auto before = g.players;
      g = step(g, ts.actions).state;
      for (int p = 0; p < 2; ++p) {
        std::optional<MacroAction> lab;
        for (const auto& e : ts.events) {
          if (e.player != p) continue;
          switch (e.kind) {
            case EventKind::pickup_ingredient:
              lab = e.item == Item::onion ? MacroAction::pick_onion
                    : e.item == Item::rice ? MacroAction::pick_rice
                                           : MacroAction::pick_protein;
              break;
            case EventKind::pickup_plate: lab = MacroAction::pick_plate; break;
            case EventKind::load_station: lab = MacroAction::load_station; break;
            case EventKind::plate_dish: lab = MacroAction::plate_dish; break;
            case EventKind::deliver:
            case EventKind::deliver_unmatched: lab = MacroAction::deliver; break;
            case EventKind::counter_place:
            case EventKind::counter_pick: lab = MacroAction::counter_exchange; break;
            case EventKind::trash: lab = MacroAction::trash; break;
            default: break;
          }
        }
        const bool moved = g.players[static_cast<std::size_t>(p)].position != before[static_cast<std::size_t>(p)].position;
        auto& st = still[static_cast<std::size_t>(p)];
        if (lab || moved) {
          st = 0;
        } else if (++st >= 12) {
          lab = MacroAction::idle;
          st = 0;
        }
        if (lab) expect[static_cast<std::size_t>(p)].push_back({ts.tick, *lab});
      }
    }
    CHECK(label_macro_actions(t) == expect);
  }
}

TEST_CASE("trajectory files round-trip and replay; stale layout versions are rejected") {
  Rng rng(8);
  GameState s = load_layout("ring", 77);
  Trajectory t;
  t.layout = "ring";
  t.layout_version = s.layout->version;
  t.seed = 77;
  t.episode_length = s.episode_length;
  t.policy_ids = {"rand_a", "rand_b"};
  MacroLabeler labeler;
  labeler.reset(s);
  while (!s.terminal()) {
    TrajectoryStep ts;
    ts.tick = s.tick;
    ts.obs = {to_stored(observe(s, 0)), to_stored(observe(s, 1))};
    ts.actions = talents::testing::random_joint(rng);
    auto r = step(s, ts.actions);
    ts.reward = r.reward;
    ts.events = r.events;
    auto labs = labeler.observe(r.state, r.events);
    for (int p = 0; p < 2; ++p)
      if (labs[static_cast<std::size_t>(p)]) t.labels[static_cast<std::size_t>(p)].push_back({ts.tick, *labs[static_cast<std::size_t>(p)]});
    t.steps.push_back(std::move(ts));
    s = r.state;
  }
  t.score = s.score;
  std::stringstream ss;
  write_trajectory(ss, t);
  Trajectory back = read_trajectory(ss);
  CHECK(back.steps.size() == t.steps.size());
  CHECK(back.labels == t.labels);
  CHECK(back.policy_ids == t.policy_ids);
  std::string why;
  CHECK(replay_matches(back, &why));
  INFO(why);
  CHECK(label_macro_actions(back) == t.labels);

  back.layout_version ^= 1;
  CHECK_THROWS_AS(label_macro_actions(back), FormatError);

  std::stringstream bad("#talents-trajectory 9\n");
  CHECK_THROWS_AS(read_trajectory(bad), FormatError);
}
