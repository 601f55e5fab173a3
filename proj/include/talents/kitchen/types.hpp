#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "talents/core/error.hpp"

namespace talents::kitchen {

struct Coord {
  int x = 0;
  int y = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord& a, const Coord& b) {
    // Row-major order: "lowest coordinate" means smallest y, then x.
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

enum class Orientation : std::uint8_t { north, south, east, west };

inline Coord step_toward(Coord c, Orientation o) {
  switch (o) {
    case Orientation::north: return {c.x, c.y - 1};
    case Orientation::south: return {c.x, c.y + 1};
    case Orientation::east: return {c.x + 1, c.y};
    case Orientation::west: return {c.x - 1, c.y};
  }
  return c;
}

enum class PrimitiveAction : std::uint8_t { up, down, left, right, stay, interact };
inline constexpr int kNumPrimitiveActions = 6;

inline constexpr std::array<std::string_view, kNumPrimitiveActions> kPrimitiveNames = {
    "up", "down", "left", "right", "stay", "interact"};

inline std::string_view to_string(PrimitiveAction a) { return kPrimitiveNames[static_cast<int>(a)]; }

inline std::optional<PrimitiveAction> parse_primitive(std::string_view s) {
  for (int i = 0; i < kNumPrimitiveActions; ++i)
    if (kPrimitiveNames[i] == s) return static_cast<PrimitiveAction>(i);
  return std::nullopt;
}

inline std::optional<Orientation> move_orientation(PrimitiveAction a) {
  switch (a) {
    case PrimitiveAction::up: return Orientation::north;
    case PrimitiveAction::down: return Orientation::south;
    case PrimitiveAction::left: return Orientation::west;
    case PrimitiveAction::right: return Orientation::east;
    default: return std::nullopt;
  }
}

inline PrimitiveAction move_action(Orientation o) {
  switch (o) {
    case Orientation::north: return PrimitiveAction::up;
    case Orientation::south: return PrimitiveAction::down;
    case Orientation::east: return PrimitiveAction::right;
    case Orientation::west: return PrimitiveAction::left;
  }
  return PrimitiveAction::stay;
}

enum class Ingredient : std::uint8_t { onion, rice, protein };
inline constexpr int kNumIngredients = 3;

enum class Item : std::uint8_t {
  none,
  onion,
  rice,
  protein,
  plate,
  plate_rice,
  plate_protein,
  soup_dish,
  rice_dish,
  burnt,       // charred rice or protein (one unit)
  burnt_soup,  // charred pot of three onions
};
inline constexpr int kNumItemKinds = 11;

inline constexpr std::array<std::string_view, kNumItemKinds> kItemNames = {
    "none",          "onion",     "rice",      "protein", "plate", "plate_rice",
    "plate_protein", "soup_dish", "rice_dish", "burnt", "burnt_soup"};

inline std::string_view to_string(Item i) { return kItemNames[static_cast<int>(i)]; }

inline Item ingredient_item(Ingredient g) {
  switch (g) {
    case Ingredient::onion: return Item::onion;
    case Ingredient::rice: return Item::rice;
    case Ingredient::protein: return Item::protein;
  }
  return Item::none;
}

inline bool is_ingredient(Item i) {
  return i == Item::onion || i == Item::rice || i == Item::protein;
}
inline bool is_plate_like(Item i) {
  return i == Item::plate || i == Item::plate_rice || i == Item::plate_protein;
}
inline bool is_dish(Item i) { return i == Item::soup_dish || i == Item::rice_dish; }
inline bool is_burnt(Item i) { return i == Item::burnt || i == Item::burnt_soup; }

enum class StationKind : std::uint8_t { pot, rice_cooker, grill };
inline constexpr int kNumStationKinds = 3;
inline constexpr std::array<std::string_view, kNumStationKinds> kStationNames = {"pot", "rice_cooker",
                                                                                  "grill"};

inline Ingredient station_ingredient(StationKind k) {
  switch (k) {
    case StationKind::pot: return Ingredient::onion;
    case StationKind::rice_cooker: return Ingredient::rice;
    case StationKind::grill: return Ingredient::protein;
  }
  return Ingredient::onion;
}

/// Ingredients required before a station starts cooking.
inline int station_capacity(StationKind k) { return k == StationKind::pot ? 3 : 1; }

enum class Recipe : std::uint8_t { soup, rice_dish };
inline constexpr std::array<std::string_view, 2> kRecipeNames = {"soup", "rice_dish"};

inline Recipe dish_recipe(Item dish) { return dish == Item::soup_dish ? Recipe::soup : Recipe::rice_dish; }

enum class TileKind : std::uint8_t {
  floor,
  counter,
  ingredient_source,
  plate_stack,
  delivery_window,
  station_slot,
  trash,
};

struct Tile {
  TileKind kind = TileKind::counter;
  Ingredient ingredient = Ingredient::onion;  // ingredient_source only
  int station = -1;                           // station_slot only: index into stations
  bool walkable() const { return kind == TileKind::floor; }
};

struct PlayerState {
  Coord position;
  Orientation orientation = Orientation::north;
  Item held = Item::none;
  friend bool operator==(const PlayerState&, const PlayerState&) = default;
};

enum class StationPhase : std::uint8_t { idle, cooking, ready, burnt };
inline constexpr std::array<std::string_view, 4> kPhaseNames = {"idle", "cooking", "ready", "burnt"};

struct StationState {
  StationKind kind = StationKind::pot;
  Coord position;
  std::array<std::uint8_t, kNumIngredients> contents{};  // multiset as counts
  int cook_timer = 0;  // cooking: ticks to ready; ready: ticks to burnt
  StationPhase phase = StationPhase::idle;

  int loaded() const { return contents[0] + contents[1] + contents[2]; }
  friend bool operator==(const StationState&, const StationState&) = default;
};

struct Order {
  int id = 0;
  Recipe recipe = Recipe::soup;
  int time_remaining = 0;
  int duration = 0;
  int bonus_window = 0;
  int base_reward = 0;
  int bonus_reward = 0;

  /// Bonus applies while the order is younger than bonus_window ticks.
  bool in_bonus_window() const { return duration - time_remaining < bonus_window; }
  friend bool operator==(const Order&, const Order&) = default;
};

}  // namespace talents::kitchen
