#pragma once

// Helpers shared by the unit suites. Deliberately independent of the
// opponents module so the game-level oracles do not share code paths with
// what they check.

#include <cmath>
#include <functional>
#include <vector>

#include "ice/common.hpp"
#include "ice/game.hpp"
#include "ice/strategy.hpp"

namespace ice::testing {

inline VectorXd random_simplex(int k, Rng& rng) {
  VectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = -std::log(1.0 - uniform01(rng));
  return v / v.sum();
}

inline BehaviorStrategy random_strategy(const GameSpecPtr& spec, int player, Rng& rng) {
  BehaviorStrategy::Table t;
  for (const auto& info : enumerate_infosets(spec, player)) {
    t.emplace(info.key, random_simplex(static_cast<int>(info.legal.size()), rng));
  }
  return BehaviorStrategy(spec, player, std::move(t));
}

inline StrategyProfile random_profile(const GameSpecPtr& spec, Rng& rng) {
  std::vector<BehaviorStrategy> seats;
  for (int p = 0; p < spec->num_players(); ++p) seats.push_back(random_strategy(spec, p, rng));
  return StrategyProfile(std::move(seats));
}

inline StrategyProfile uniform_profile(const GameSpecPtr& spec) {
  std::vector<BehaviorStrategy> seats;
  for (int p = 0; p < spec->num_players(); ++p) seats.push_back(BehaviorStrategy::uniform(spec, p));
  return StrategyProfile(std::move(seats));
}

// Visits every terminal history with its reach probability, walking
// GameState directly (no compiled tree).
inline void for_each_terminal(const GameState& s, const StrategyProfile& profile, double reach,
                              const std::function<void(const GameState&, double)>& fn) {
  if (s.is_terminal()) {
    fn(s, reach);
    return;
  }
  if (s.is_chance()) {
    for (const auto& [a, p] : s.chance_outcomes()) for_each_terminal(s.child(a), profile, reach * p, fn);
    return;
  }
  const int player = s.current_player();
  const auto legal = s.legal_actions();
  const VectorXd& probs = profile.at(player).at(s.infoset_key(player));
  for (std::size_t k = 0; k < legal.size(); ++k) {
    for_each_terminal(s.child(legal[k]), profile, reach * probs(static_cast<Eigen::Index>(k)), fn);
  }
}

// Plays one episode by sampling every seat and chance.
inline std::vector<double> sample_episode(const GameSpecPtr& spec, const StrategyProfile& profile,
                                          Rng& rng) {
  GameState s(spec);
  while (!s.is_terminal()) {
    if (s.is_chance()) {
      const auto outcomes = s.chance_outcomes();
      VectorXd w(static_cast<Eigen::Index>(outcomes.size()));
      for (std::size_t i = 0; i < outcomes.size(); ++i) w(static_cast<Eigen::Index>(i)) = outcomes[i].second;
      s = s.child(outcomes[sample_index(w, rng)].first);
    } else {
      const int p = s.current_player();
      const auto legal = s.legal_actions();
      s = s.child(legal[sample_index(profile.at(p).at(s.infoset_key(p)), rng)]);
    }
  }
  return s.returns();
}

}  // namespace ice::testing
