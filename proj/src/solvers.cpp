#include "ice/solvers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ice {

VectorXd regret_matching(const VectorXd& regrets) {
  VectorXd pos = regrets.cwiseMax(0.0);
  const double total = pos.sum();
  if (total > 0.0) return pos / total;
  return VectorXd::Constant(regrets.size(), 1.0 / static_cast<double>(regrets.size()));
}

namespace {

constexpr int kMaxPlayers = 3;
using Values = std::array<double, kMaxPlayers>;
using Reach = std::array<double, kMaxPlayers + 1>;  // seats, then chance

struct CfrPass {
  const GameTree& tree;
  const TabularProfile& current;
  std::vector<std::vector<VectorXd>>& regrets;
  std::vector<std::vector<VectorXd>>& weights;
  int n;

  Values walk(std::uint32_t id, const Reach& reach) {
    const auto& node = tree.nodes()[id];
    Values v{};
    if (node.player == kTerminalPlayer) {
      const auto u = tree.utility(node.index);
      for (int p = 0; p < n; ++p) v[p] = u[p];
      return v;
    }
    if (node.player == kChancePlayer) {
      for (int k = 0; k < node.num_children; ++k) {
        const std::uint32_t c = node.first_child + k;
        const double prob = tree.nodes()[c].chance_prob;
        Reach r = reach;
        r[kMaxPlayers] *= prob;
        const Values cv = walk(c, r);
        for (int p = 0; p < n; ++p) v[p] += prob * cv[p];
      }
      return v;
    }
    const int player = node.player;
    const VectorXd& sigma = current[player][node.index];
    std::array<double, 8> own{};  // child values for the acting seat
    for (int k = 0; k < node.num_children; ++k) {
      Reach r = reach;
      r[player] *= sigma(k);
      const Values cv = walk(node.first_child + k, r);
      own[k] = cv[player];
      for (int p = 0; p < n; ++p) v[p] += sigma(k) * cv[p];
    }
    double cf_reach = reach[kMaxPlayers];
    for (int p = 0; p < n; ++p) {
      if (p != player) cf_reach *= reach[p];
    }
    VectorXd& reg = regrets[player][node.index];
    VectorXd& w = weights[player][node.index];
    for (int k = 0; k < node.num_children; ++k) {
      reg(k) += cf_reach * (own[k] - v[player]);
      w(k) += reach[player] * sigma(k);
    }
    return v;
  }
};

VectorXd normalized_or_uniform(const VectorXd& w) {
  const double total = w.sum();
  if (total > 0.0) return w / total;
  return VectorXd::Constant(w.size(), 1.0 / static_cast<double>(w.size()));
}

}  // namespace

CfrState::CfrState(GameSpecPtr spec) : tree_(GameTree::get(spec)) {
  const int n = tree_->num_players();
  if (n > kMaxPlayers) throw std::invalid_argument("too many players for CFR");
  regrets_.resize(n);
  weights_.resize(n);
  for (int p = 0; p < n; ++p) {
    for (const auto& info : tree_->infosets(p)) {
      const auto k = static_cast<Eigen::Index>(info.legal.size());
      regrets_[p].push_back(VectorXd::Zero(k));
      weights_[p].push_back(VectorXd::Zero(k));
    }
  }
}

void CfrState::iterate() {
  const int n = tree_->num_players();
  TabularProfile current(n);
  for (int p = 0; p < n; ++p) {
    for (const auto& r : regrets_[p]) current[p].push_back(regret_matching(r));
  }
  Reach reach;
  reach.fill(1.0);
  CfrPass pass{*tree_, current, regrets_, weights_, n};
  pass.walk(0, reach);
  ++iterations_;
}

StrategyProfile CfrState::average_strategy() const {
  StrategyProfile out(tree_->num_players());
  for (int p = 0; p < tree_->num_players(); ++p) {
    std::vector<VectorXd> table;
    for (const auto& w : weights_[p]) table.push_back(normalized_or_uniform(w));
    out.set(untabulate(*tree_, p, table));
  }
  return out;
}

StrategyProfile CfrState::current_strategy() const {
  StrategyProfile out(tree_->num_players());
  for (int p = 0; p < tree_->num_players(); ++p) {
    std::vector<VectorXd> table;
    for (const auto& r : regrets_[p]) table.push_back(regret_matching(r));
    out.set(untabulate(*tree_, p, table));
  }
  return out;
}

const VectorXd& CfrState::regrets(int player, const InfoSetKey& key) const {
  const int idx = tree_->infoset_index(player, key);
  if (idx < 0) throw std::out_of_range("unknown infoset " + key);
  return regrets_[player][idx];
}

const VectorXd& CfrState::weights(int player, const InfoSetKey& key) const {
  const int idx = tree_->infoset_index(player, key);
  if (idx < 0) throw std::out_of_range("unknown infoset " + key);
  return weights_[player][idx];
}

CfrState cfr_iterate(CfrState state) {
  state.iterate();
  return state;
}

namespace {

// Best response by backward induction over the responder's infosets, deepest
// (longest own action sequence) first. Node values below an infoset only
// depend on deeper responder infosets, which are already decided.
class BestResponder {
 public:
  BestResponder(const GameTree& tree, const TabularProfile& opp, int responder)
      : tree_(tree), opp_(opp), me_(responder),
        memo_(tree.nodes().size(), std::numeric_limits<double>::quiet_NaN()),
        choice_(tree.infosets(responder).size(), -1),
        members_(tree.infosets(responder).size()),
        depth_(tree.infosets(responder).size(), 0) {}

  BestResponseResult run() {
    collect(0, 1.0, 0);
    std::vector<int> order(choice_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return depth_[a] > depth_[b]; });
    for (int info : order) decide(info);

    std::vector<VectorXd> table;
    for (std::size_t i = 0; i < choice_.size(); ++i) {
      VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(tree_.infosets(me_)[i].legal.size()));
      v(choice_[i]) = 1.0;
      table.push_back(std::move(v));
    }
    return {untabulate(tree_, me_, table), value(0)};
  }

 private:
  void collect(std::uint32_t id, double reach, int depth) {
    const auto& node = tree_.nodes()[id];
    if (node.player == kTerminalPlayer) return;
    if (node.player == me_) {
      members_[node.index].emplace_back(id, reach);
      depth_[node.index] = depth;
      for (int k = 0; k < node.num_children; ++k) collect(node.first_child + k, reach, depth + 1);
      return;
    }
    for (int k = 0; k < node.num_children; ++k) {
      const std::uint32_t c = node.first_child + k;
      const double prob = node.player == kChancePlayer ? tree_.nodes()[c].chance_prob
                                                       : opp_[node.player][node.index](k);
      collect(c, reach * prob, depth);
    }
  }

  void decide(int info) {
    const int k_count = static_cast<int>(tree_.infosets(me_)[info].legal.size());
    VectorXd q = VectorXd::Zero(k_count);
    for (const auto& [id, reach] : members_[info]) {
      if (reach == 0.0) continue;
      const auto& node = tree_.nodes()[id];
      for (int k = 0; k < k_count; ++k) q(k) += reach * value(node.first_child + k);
    }
    const double best = q.maxCoeff();
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    for (int k = 0; k < k_count; ++k) {
      if (q(k) >= best - tol) {
        choice_[info] = k;
        break;
      }
    }
  }

  double value(std::uint32_t id) {
    if (!std::isnan(memo_[id])) return memo_[id];
    const auto& node = tree_.nodes()[id];
    double v = 0.0;
    if (node.player == kTerminalPlayer) {
      v = tree_.utility(node.index)[me_];
    } else if (node.player == me_) {
      if (choice_[node.index] < 0) throw std::logic_error("best response order violated");
      v = value(node.first_child + choice_[node.index]);
    } else {
      for (int k = 0; k < node.num_children; ++k) {
        const std::uint32_t c = node.first_child + k;
        const double prob = node.player == kChancePlayer ? tree_.nodes()[c].chance_prob
                                                         : opp_[node.player][node.index](k);
        if (prob != 0.0) v += prob * value(c);
      }
    }
    memo_[id] = v;
    return v;
  }

  const GameTree& tree_;
  const TabularProfile& opp_;
  int me_;
  std::vector<double> memo_;
  std::vector<int> choice_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> members_;
  std::vector<int> depth_;
};

}  // namespace

BestResponseResult best_response(const GameSpecPtr& spec, const StrategyProfile& opponents,
                                 int responder) {
  const auto tree = GameTree::get(spec);
  if (responder < 0 || responder >= tree->num_players()) {
    throw std::invalid_argument("bad responder seat");
  }
  if (opponents.num_players() != tree->num_players()) {
    throw std::invalid_argument("profile/game player count mismatch");
  }
  for (int p = 0; p < tree->num_players(); ++p) {
    if (p != responder && !opponents.has(p)) {
      throw std::invalid_argument("missing opponent strategy for seat " + std::to_string(p));
    }
  }
  StrategyProfile others(tree->num_players());
  for (int p = 0; p < tree->num_players(); ++p) {
    if (p != responder) others.set(opponents.at(p));
  }
  const TabularProfile opp = tabulate(*tree, others);
  return BestResponder(*tree, opp, responder).run();
}

double nash_conv(const GameSpecPtr& spec, const StrategyProfile& profile) {
  if (!profile.complete()) throw std::invalid_argument("incomplete profile");
  const VectorXd u = expected_value(spec, profile);
  double total = 0.0;
  for (int p = 0; p < spec->num_players(); ++p) {
    total += best_response(spec, profile, p).value - u(p);
  }
  return std::max(0.0, total);
}

}  // namespace ice
