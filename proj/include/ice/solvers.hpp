#pragma once

// Vanilla CFR with regret matching, exact best response, and NashConv.

#include <memory>
#include <vector>

#include "ice/game_tree.hpp"
#include "ice/strategy.hpp"

namespace ice {

// Positive-part normalization; uniform when no regret is positive.
VectorXd regret_matching(const VectorXd& regrets);

// Per seat, per infoset: cumulative regrets and cumulative (own-reach
// weighted) strategy weights, plus the iteration counter.
class CfrState {
 public:
  explicit CfrState(GameSpecPtr spec);

  const GameSpecPtr& spec() const { return tree_->spec(); }
  const GameTree& tree() const { return *tree_; }
  int iterations() const { return iterations_; }

  // One full-traversal, simultaneous-update iteration.
  void iterate();

  // Cumulative weights normalized; zero-weight infosets fall back to uniform.
  StrategyProfile average_strategy() const;
  StrategyProfile current_strategy() const;

  const VectorXd& regrets(int player, const InfoSetKey& key) const;
  const VectorXd& weights(int player, const InfoSetKey& key) const;

 private:
  std::shared_ptr<const GameTree> tree_;
  std::vector<std::vector<VectorXd>> regrets_;
  std::vector<std::vector<VectorXd>> weights_;
  int iterations_ = 0;
};

CfrState cfr_iterate(CfrState state);

struct BestResponseResult {
  BehaviorStrategy strategy;  // pure
  double value = 0.0;
};

// Exact best response of `responder` against the other seats of `opponents`
// (the responder's own seat, if present, is ignored). Ties go to the lowest
// action id. Throws std::invalid_argument when an opponent seat is missing.
BestResponseResult best_response(const GameSpecPtr& spec, const StrategyProfile& opponents,
                                 int responder);

// sum_i [ max_{sigma_i'} u_i(sigma_i', sigma_-i) - u_i(sigma) ], clamped at 0.
double nash_conv(const GameSpecPtr& spec, const StrategyProfile& profile);

}  // namespace ice
