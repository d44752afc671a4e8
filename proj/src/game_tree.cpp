#include "ice/game_tree.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>

namespace ice {

GameTree::GameTree(GameSpecPtr spec) : spec_(std::move(spec)) {
  const int n = spec_->num_players();
  std::vector<std::map<InfoSetKey, std::vector<int>>> found(n);
  std::vector<InfoSetKey> node_keys;  // per node, for seat nodes

  struct Pending {
    GameState state;
    std::uint32_t node;
  };
  nodes_.push_back(Node{0, -1, 0, 0, -1, 1.0});
  node_keys.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({GameState(spec_), 0});

  while (!stack.empty()) {
    Pending item = std::move(stack.back());
    stack.pop_back();
    const GameState& s = item.state;
    Node node = nodes_[item.node];
    node.player = s.current_player();
    if (s.is_terminal()) {
      node.index = static_cast<std::int32_t>(utilities_.size() / n);
      const auto u = s.returns();
      utilities_.insert(utilities_.end(), u.begin(), u.end());
      nodes_[item.node] = node;
      continue;
    }
    std::vector<std::pair<int, double>> edges;
    if (s.is_chance()) {
      edges = s.chance_outcomes();
    } else {
      const auto legal = s.legal_actions();
      for (int a : legal) edges.emplace_back(a, 1.0);
      InfoSetKey key = s.infoset_key(node.player);
      auto [it, inserted] = found[node.player].emplace(key, legal);
      if (!inserted && it->second != legal) {
        throw std::logic_error("inconsistent legal actions in infoset " + key);
      }
      node_keys[item.node] = std::move(key);
    }
    node.first_child = static_cast<std::uint32_t>(nodes_.size());
    node.num_children = static_cast<std::uint16_t>(edges.size());
    nodes_[item.node] = node;
    for (const auto& [a, p] : edges) {
      nodes_.push_back(Node{0, -1, 0, 0, static_cast<std::int16_t>(a), p});
      node_keys.emplace_back();
    }
    // Push in reverse so the DFS visits children in canonical order.
    for (int k = static_cast<int>(edges.size()) - 1; k >= 0; --k) {
      stack.push_back({s.child(edges[k].first), node.first_child + k});
    }
  }

  infosets_.resize(n);
  lookup_.resize(n);
  for (int p = 0; p < n; ++p) {
    for (auto& [key, legal] : found[p]) {
      lookup_[p].emplace(key, static_cast<int>(infosets_[p].size()));
      infosets_[p].push_back(InfoSetInfo{key, legal});
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    if (node.player >= 0) node.index = lookup_[node.player].at(node_keys[i]);
  }
}

std::shared_ptr<const GameTree> GameTree::get(const GameSpecPtr& spec) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const GameTree>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(spec->name());
  if (it != cache.end()) return it->second;
  std::shared_ptr<const GameTree> tree(new GameTree(spec));
  cache.emplace(spec->name(), tree);
  return tree;
}

int GameTree::infoset_index(int player, const InfoSetKey& key) const {
  const auto& m = lookup_.at(player);
  auto it = m.find(key);
  return it == m.end() ? -1 : it->second;
}

std::vector<InfoSetInfo> enumerate_infosets(const GameSpecPtr& spec, int player) {
  if (player < 0 || player >= spec->num_players()) {
    throw std::invalid_argument("bad player index");
  }
  return GameTree::get(spec)->infosets(player);
}

TabularProfile tabulate(const GameTree& tree, const StrategyProfile& profile) {
  if (profile.num_players() != tree.num_players()) {
    throw std::invalid_argument("profile/game player count mismatch");
  }
  TabularProfile out(tree.num_players());
  for (int p = 0; p < tree.num_players(); ++p) {
    if (!profile.has(p)) continue;
    const auto& strat = profile.at(p);
    for (const auto& info : tree.infosets(p)) out[p].push_back(strat.at(info.key));
  }
  return out;
}

BehaviorStrategy untabulate(const GameTree& tree, int player,
                            const std::vector<VectorXd>& table) {
  BehaviorStrategy::Table t;
  const auto& infos = tree.infosets(player);
  for (std::size_t i = 0; i < infos.size(); ++i) t.emplace(infos[i].key, table.at(i));
  return BehaviorStrategy(tree.spec(), player, std::move(t));
}

namespace {

void accumulate_value(const GameTree& tree, const TabularProfile& profile,
                      std::uint32_t id, double reach, VectorXd& out) {
  const auto& node = tree.nodes()[id];
  if (node.player == kTerminalPlayer) {
    const auto u = tree.utility(node.index);
    for (int p = 0; p < tree.num_players(); ++p) out(p) += reach * u[p];
    return;
  }
  for (int k = 0; k < node.num_children; ++k) {
    const std::uint32_t c = node.first_child + k;
    const double prob = node.player == kChancePlayer
                            ? tree.nodes()[c].chance_prob
                            : profile[node.player][node.index](k);
    if (prob == 0.0) continue;
    accumulate_value(tree, profile, c, reach * prob, out);
  }
}

}  // namespace

VectorXd expected_value(const GameTree& tree, const TabularProfile& profile) {
  for (int p = 0; p < tree.num_players(); ++p) {
    if (profile[p].size() != tree.infosets(p).size()) {
      throw std::invalid_argument("incomplete profile: seat " + std::to_string(p));
    }
  }
  VectorXd out = VectorXd::Zero(tree.num_players());
  accumulate_value(tree, profile, 0, 1.0, out);
  return out;
}

VectorXd expected_value(const GameSpecPtr& spec, const StrategyProfile& profile) {
  if (!profile.complete()) throw std::invalid_argument("incomplete profile");
  const auto tree = GameTree::get(spec);
  return expected_value(*tree, tabulate(*tree, profile));
}

ReachDecomposition terminal_reach_decomposition(const GameSpecPtr& spec,
                                                const StrategyProfile& profile,
                                                const GameState& terminal) {
  if (!terminal.is_terminal()) {
    throw std::invalid_argument("reach decomposition needs a terminal history");
  }
  if (!profile.complete()) throw std::invalid_argument("incomplete profile");
  const int n = spec->num_players();
  ReachDecomposition out;
  out.factors = VectorXd::Ones(n + 1);
  GameState s(spec);
  for (int a : terminal.history()) {
    if (s.is_chance()) {
      for (const auto& [outcome, p] : s.chance_outcomes()) {
        if (outcome == a) out.factors(n) *= p;
      }
    } else {
      const int p = s.current_player();
      const auto legal = s.legal_actions();
      const auto pos = std::find(legal.begin(), legal.end(), a) - legal.begin();
      out.factors(p) *= profile.at(p).at(s.infoset_key(p))(pos);
    }
    s = s.child(a);
  }
  out.total = out.factors.prod();
  return out;
}

}  // namespace ice
