#pragma once

#include <array>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "talents/core/error.hpp"
#include "talents/core/hash.hpp"
#include "talents/kitchen/types.hpp"

namespace talents::kitchen {

// Layout text format, version 1
// -----------------------------
//   talents-layout 1
//   name <id>
//   cook_ticks pot=<n> rice_cooker=<n> grill=<n>
//   burn_window <n>
//   orders initial=<n> interval=<n> max=<n> duration=<n> bonus_window=<n>
//          base=<n> bonus=<n> soup_share=<real>        (one line)
//   episode_ticks <n>
//   grid
//   <rows...>
//   end
//
// Grid glyphs: 'X' counter, ' ' floor, 'O' onion source, 'R' rice source,
// 'M' protein source, 'D' plate stack, 'S' delivery window, 'P' pot,
// 'C' rice cooker, 'G' grill, 'T' trash, '1'/'2' player starts (floor).
// Lines starting with '#' are comments. Boundary tiles must not be floor.

struct OrderSchedule {
  int initial = 2;
  int interval = 40;
  int max_concurrent = 4;
  int duration = 300;
  int bonus_window = 150;
  int base_reward = 20;
  int bonus_reward = 10;
  double soup_share = 0.5;
};

struct StationSpec {
  StationKind kind;
  Coord position;
};

struct Layout {
  std::string name;
  int width = 0;
  int height = 0;
  std::vector<Tile> tiles;  // row-major
  std::vector<StationSpec> stations;
  std::array<Coord, 2> starts{};
  std::array<int, kNumStationKinds> cook_ticks{20, 15, 10};
  int burn_window = 100;
  OrderSchedule orders;
  int episode_ticks = 400;
  std::uint64_t version = 0;  // hash of the canonical text

  bool in_bounds(Coord c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  const Tile& at(Coord c) const { return tiles[static_cast<std::size_t>(c.y * width + c.x)]; }
  int index(Coord c) const { return c.y * width + c.x; }
  Coord coord(int idx) const { return {idx % width, idx / width}; }
  bool walkable(Coord c) const { return in_bounds(c) && at(c).walkable(); }
};

using LayoutPtr = std::shared_ptr<const Layout>;

namespace detail {

inline std::map<std::string, std::string> parse_kv(std::istringstream& rest) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (rest >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("layout: expected key=value, got '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

inline int to_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw FormatError("layout: bad integer for " + key);
  }
}

}  // namespace detail

/// Parses the versioned layout text. Throws FormatError on malformed input.
inline Layout parse_layout(std::string_view text) {
  Layout layout;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  std::vector<std::string> rows;
  bool in_grid = false;
  bool closed = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_grid) {
      if (line == "end") {
        in_grid = false;
        closed = true;
        continue;
      }
      rows.push_back(line);
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!header) {
      int ver = 0;
      ls >> ver;
      if (key != "talents-layout" || ver != 1) throw FormatError("layout: missing 'talents-layout 1' header");
      header = true;
      continue;
    }
    if (key == "name") {
      ls >> layout.name;
    } else if (key == "cook_ticks") {
      auto kv = detail::parse_kv(ls);
      layout.cook_ticks = {detail::to_int(kv, "pot", 20), detail::to_int(kv, "rice_cooker", 15),
                           detail::to_int(kv, "grill", 10)};
    } else if (key == "burn_window") {
      ls >> layout.burn_window;
    } else if (key == "orders") {
      auto kv = detail::parse_kv(ls);
      auto& o = layout.orders;
      o.initial = detail::to_int(kv, "initial", o.initial);
      o.interval = detail::to_int(kv, "interval", o.interval);
      o.max_concurrent = detail::to_int(kv, "max", o.max_concurrent);
      o.duration = detail::to_int(kv, "duration", o.duration);
      o.bonus_window = detail::to_int(kv, "bonus_window", o.bonus_window);
      o.base_reward = detail::to_int(kv, "base", o.base_reward);
      o.bonus_reward = detail::to_int(kv, "bonus", o.bonus_reward);
      if (auto it = kv.find("soup_share"); it != kv.end()) o.soup_share = std::stod(it->second);
    } else if (key == "episode_ticks") {
      ls >> layout.episode_ticks;
    } else if (key == "grid") {
      in_grid = true;
    } else {
      throw FormatError("layout: unknown key '" + key + "'");
    }
  }
  if (!header) throw FormatError("layout: empty input");
  if (!closed || rows.empty()) throw FormatError("layout: missing grid ... end block");
  if (layout.name.empty()) throw FormatError("layout: missing name");

  layout.height = static_cast<int>(rows.size());
  layout.width = static_cast<int>(rows[0].size());
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != layout.width) throw FormatError("layout: ragged grid rows");

  layout.tiles.resize(static_cast<std::size_t>(layout.width * layout.height));
  int starts_seen = 0;
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      Tile t;
      const char g = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      switch (g) {
        case 'X': t.kind = TileKind::counter; break;
        case ' ': t.kind = TileKind::floor; break;
        case 'O': t = {TileKind::ingredient_source, Ingredient::onion, -1}; break;
        case 'R': t = {TileKind::ingredient_source, Ingredient::rice, -1}; break;
        case 'M': t = {TileKind::ingredient_source, Ingredient::protein, -1}; break;
        case 'D': t.kind = TileKind::plate_stack; break;
        case 'S': t.kind = TileKind::delivery_window; break;
        case 'T': t.kind = TileKind::trash; break;
        case 'P':
        case 'C':
        case 'G': {
          const StationKind k = g == 'P' ? StationKind::pot : g == 'C' ? StationKind::rice_cooker : StationKind::grill;
          t.kind = TileKind::station_slot;
          t.station = static_cast<int>(layout.stations.size());
          layout.stations.push_back({k, {x, y}});
          break;
        }
        case '1':
        case '2':
          t.kind = TileKind::floor;
          layout.starts[static_cast<std::size_t>(g - '1')] = {x, y};
          ++starts_seen;
          break;
        default: throw FormatError(std::string("layout: unknown glyph '") + g + "'");
      }
      const bool boundary = x == 0 || y == 0 || x == layout.width - 1 || y == layout.height - 1;
      if (boundary && t.kind == TileKind::floor) throw FormatError("layout: floor tile on boundary");
      layout.tiles[static_cast<std::size_t>(y * layout.width + x)] = t;
    }
  }
  if (starts_seen != 2) throw FormatError("layout: need exactly one '1' and one '2'");
  if (layout.stations.size() != kNumStationKinds) throw FormatError("layout: need exactly three stations");
  std::array<int, kNumStationKinds> per_kind{};
  for (const auto& s : layout.stations) ++per_kind[static_cast<int>(s.kind)];
  for (int c : per_kind)
    if (c != 1) throw FormatError("layout: need one pot, one rice cooker and one grill");

  layout.version = hash_string(text);
  return layout;
}

// Built-in layouts. Soup work (onions, pot) and rice-dish work (rice, protein,
// rice cooker, grill) sit in different parts of each map so that role division
// changes team throughput.
inline constexpr std::string_view kLayoutOpen = R"(talents-layout 1
name open
cook_ticks pot=20 rice_cooker=15 grill=10
burn_window 100
orders initial=2 interval=40 max=4 duration=300 bonus_window=150 base=20 bonus=10 soup_share=0.5
episode_ticks 400
grid
XXPXXXCGX
O       R
X 1     M
D       X
X     2 X
XXSXXXTXX
end
)";

inline constexpr std::string_view kLayoutHallway = R"(talents-layout 1
name hallway
cook_ticks pot=20 rice_cooker=15 grill=10
burn_window 100
orders initial=2 interval=40 max=4 duration=300 bonus_window=150 base=20 bonus=10 soup_share=0.5
episode_ticks 400
grid
XXXPXXXXXXXCXGX
O   XXXXXXX   R
D 1         2 M
X   XXXXXXX   X
XXSXXXXXXXXXTXX
end
)";

inline constexpr std::string_view kLayoutForcedCoord = R"(talents-layout 1
name forced_coord
cook_ticks pot=20 rice_cooker=15 grill=10
burn_window 100
orders initial=2 interval=40 max=4 duration=300 bonus_window=150 base=20 bonus=10 soup_share=0.5
episode_ticks 400
grid
XXXXPXX
O  X  C
R 1X2 G
M  X  X
D  X  S
XXXXTXX
end
)";

inline constexpr std::string_view kLayoutRing = R"(talents-layout 1
name ring
cook_ticks pot=20 rice_cooker=15 grill=10
burn_window 100
orders initial=2 interval=40 max=4 duration=300 bonus_window=150 base=20 bonus=10 soup_share=0.5
episode_ticks 400
grid
XXXPXCXXX
O 1     G
X XXXXX X
R XXXXX M
X XXXXX X
D     2 T
XXXXSXXXX
end
)";

inline const std::array<std::string_view, 4>& layout_names() {
  static const std::array<std::string_view, 4> names = {"open", "hallway", "forced_coord", "ring"};
  return names;
}

inline std::string_view builtin_layout_text(std::string_view name) {
  if (name == "open") return kLayoutOpen;
  if (name == "hallway") return kLayoutHallway;
  if (name == "forced_coord") return kLayoutForcedCoord;
  if (name == "ring") return kLayoutRing;
  throw ConfigError("unknown layout id '" + std::string(name) + "'");
}

/// Shared, parsed built-in layout (parsed once per process).
inline LayoutPtr builtin_layout(std::string_view name) {
  static const std::map<std::string, LayoutPtr, std::less<>> cache = [] {
    std::map<std::string, LayoutPtr, std::less<>> m;
    for (auto n : layout_names())
      m.emplace(std::string(n), std::make_shared<const Layout>(parse_layout(builtin_layout_text(n))));
    return m;
  }();
  auto it = cache.find(name);
  if (it == cache.end()) throw ConfigError("unknown layout id '" + std::string(name) + "'");
  return it->second;
}

inline LayoutPtr load_layout_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open layout file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return std::make_shared<const Layout>(parse_layout(ss.str()));
}

}  // namespace talents::kitchen
