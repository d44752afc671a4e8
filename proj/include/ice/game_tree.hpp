#pragma once

// Compiled game tree: the full history tree of a GameSpec flattened into
// arrays, with information sets resolved to dense per-player indices. All
// exact traversals (expected values, CFR, best response) run on it.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ice/common.hpp"
#include "ice/game.hpp"
#include "ice/strategy.hpp"

namespace ice {

class GameTree {
 public:
  struct Node {
    std::int32_t player;       // seat, kChancePlayer or kTerminalPlayer
    std::int32_t index;        // infoset index for seats, terminal index
    std::uint32_t first_child;
    std::uint16_t num_children;
    std::int16_t action;       // action taken at the parent to reach here
    double chance_prob;        // 1 unless the parent is a chance node
  };

  // Builds once per game and caches; thread-safe.
  static std::shared_ptr<const GameTree> get(const GameSpecPtr& spec);

  const GameSpecPtr& spec() const { return spec_; }
  int num_players() const { return spec_->num_players(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  std::size_t num_terminals() const { return utilities_.size() / num_players(); }
  std::span<const double> utility(int terminal) const {
    return {utilities_.data() + static_cast<std::size_t>(terminal) * num_players(),
            static_cast<std::size_t>(num_players())};
  }

  const std::vector<InfoSetInfo>& infosets(int player) const { return infosets_[player]; }
  // -1 when the key is not an infoset of `player`.
  int infoset_index(int player, const InfoSetKey& key) const;

 private:
  explicit GameTree(GameSpecPtr spec);

  GameSpecPtr spec_;
  std::vector<Node> nodes_;
  std::vector<double> utilities_;
  std::vector<std::vector<InfoSetInfo>> infosets_;
  std::vector<std::unordered_map<InfoSetKey, int>> lookup_;
};

// Per seat, per infoset index: action probabilities (empty for absent seats).
using TabularProfile = std::vector<std::vector<VectorXd>>;

// Resolves a (possibly partial) profile against the tree's infoset indices.
TabularProfile tabulate(const GameTree& tree, const StrategyProfile& profile);
BehaviorStrategy untabulate(const GameTree& tree, int player,
                            const std::vector<VectorXd>& table);

// u(sigma) = sum_z pi^sigma(z) u(z), by exact traversal.
VectorXd expected_value(const GameSpecPtr& spec, const StrategyProfile& profile);
VectorXd expected_value(const GameTree& tree, const TabularProfile& profile);

struct ReachDecomposition {
  double total = 0.0;
  // One factor per seat, then chance as the last entry.
  VectorXd factors;
};

// pi^sigma(z) = prod_{i in N u {c}} pi_i^sigma(z).
ReachDecomposition terminal_reach_decomposition(const GameSpecPtr& spec,
                                                const StrategyProfile& profile,
                                                const GameState& terminal);

}  // namespace ice
