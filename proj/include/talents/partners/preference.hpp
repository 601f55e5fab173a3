#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "talents/core/error.hpp"
#include "talents/kitchen/types.hpp"

namespace talents::partners {

/// Reward-shaping terms a behavior-preference partner weighs when picking goals.
enum class Shaping : std::uint8_t {
  onion_pickup,
  rice_boiling,
  grilling,
  dishwashing,  // plate supply and clearing burnt food
  plating,
  delivery,
  idle_penalty,
  bonus_seeking,
};
inline constexpr int kNumShaping = 8;
inline constexpr std::array<std::string_view, kNumShaping> kShapingNames = {
    "onion_pickup", "rice_boiling", "grilling", "dishwashing", "plating", "delivery", "idle_penalty", "bonus_seeking"};

enum class Style : std::uint8_t { greedy, cautious };
inline constexpr std::array<std::string_view, 2> kStyleNames = {"greedy", "cautious"};

using ShapingWeights = std::array<double, kNumShaping>;

struct BehaviorPreference {
  ShapingWeights weights{};
  Style style = Style::greedy;
  std::uint64_t seed = 0;
  double competence_noise = 0.0;  // probability of a random primitive each tick

  double w(Shaping s) const { return weights[static_cast<std::size_t>(s)]; }

  void validate() const {
    bool any = false;
    for (double v : weights) {
      if (!std::isfinite(v)) throw ConfigError("behavior preference: non-finite shaping weight");
      any = any || v != 0.0;
    }
    if (!any) throw ConfigError("behavior preference: all shaping weights are zero");
    if (!(competence_noise >= 0.0 && competence_noise <= 1.0))
      throw ConfigError("behavior preference: competence noise outside [0, 1]");
  }
};

/// Weights used by the macro executor when a goal only needs to be feasible.
inline BehaviorPreference neutral_preference() {
  BehaviorPreference p;
  p.weights = {1, 1, 1, 1, 1, 1, 0.5, 0};
  return p;
}

inline Shaping ingredient_term(kitchen::Ingredient g) {
  switch (g) {
    case kitchen::Ingredient::onion: return Shaping::onion_pickup;
    case kitchen::Ingredient::rice: return Shaping::rice_boiling;
    default: return Shaping::grilling;
  }
}

}  // namespace talents::partners
