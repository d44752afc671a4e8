#include "ice/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ice/game_tree.hpp"

namespace ice {

BehaviorStrategy::BehaviorStrategy(GameSpecPtr spec, int player, Table table)
    : spec_(std::move(spec)), player_(player), table_(std::move(table)) {
  if (!spec_) throw std::invalid_argument("null game spec");
  if (player_ < 0 || player_ >= spec_->num_players()) {
    throw std::invalid_argument("bad player index");
  }
  const auto tree = GameTree::get(spec_);
  for (const auto& info : tree->infosets(player_)) {
    auto it = table_.find(info.key);
    if (it == table_.end()) {
      throw std::invalid_argument("strategy misses infoset " + info.key);
    }
    const VectorXd& probs = it->second;
    if (probs.size() != static_cast<Eigen::Index>(info.legal.size())) {
      throw std::invalid_argument("wrong action count at " + info.key);
    }
    if ((probs.array() < 0.0).any() || !probs.allFinite() ||
        std::abs(probs.sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("not a distribution at " + info.key);
    }
  }
  if (table_.size() != tree->infosets(player_).size()) {
    throw std::invalid_argument("strategy has keys outside the player's infosets");
  }
}

BehaviorStrategy BehaviorStrategy::uniform(const GameSpecPtr& spec, int player) {
  Table t;
  for (const auto& info : enumerate_infosets(spec, player)) {
    const auto k = static_cast<Eigen::Index>(info.legal.size());
    t.emplace(info.key, VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
  }
  return BehaviorStrategy(spec, player, std::move(t));
}

BehaviorStrategy BehaviorStrategy::pure(const GameSpecPtr& spec, int player,
                                        const std::map<InfoSetKey, int>& choice) {
  Table t;
  for (const auto& info : enumerate_infosets(spec, player)) {
    VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(info.legal.size()));
    int pos = 0;
    if (auto it = choice.find(info.key); it != choice.end()) {
      const auto found = std::find(info.legal.begin(), info.legal.end(), it->second);
      if (found == info.legal.end()) {
        throw std::invalid_argument("illegal pure choice at " + info.key);
      }
      pos = static_cast<int>(found - info.legal.begin());
    }
    v(pos) = 1.0;
    t.emplace(info.key, std::move(v));
  }
  return BehaviorStrategy(spec, player, std::move(t));
}

const VectorXd& BehaviorStrategy::at(const InfoSetKey& key) const {
  auto it = table_.find(key);
  if (it == table_.end()) throw std::out_of_range("no strategy entry for " + key);
  return it->second;
}

bool operator==(const BehaviorStrategy& a, const BehaviorStrategy& b) {
  if (a.player_ != b.player_ || a.table_.size() != b.table_.size()) return false;
  if ((a.spec_ == nullptr) != (b.spec_ == nullptr)) return false;
  if (a.spec_ && a.spec_->name() != b.spec_->name()) return false;
  auto ib = b.table_.begin();
  for (const auto& [key, probs] : a.table_) {
    if (key != ib->first || probs != ib->second) return false;
    ++ib;
  }
  return true;
}

StrategyProfile::StrategyProfile(std::vector<BehaviorStrategy> strategies)
    : seats_(strategies.size()) {
  for (auto& s : strategies) set(std::move(s));
  if (!complete()) throw std::invalid_argument("profile seats are not a bijection");
}

void StrategyProfile::set(BehaviorStrategy strategy) {
  const int p = strategy.player();
  if (p < 0 || p >= num_players()) throw std::invalid_argument("seat out of range");
  seats_[p] = std::move(strategy);
}

const BehaviorStrategy& StrategyProfile::at(int player) const {
  const auto& s = seats_.at(player);
  if (!s) throw std::invalid_argument("no strategy for seat " + std::to_string(player));
  return *s;
}

bool StrategyProfile::complete() const {
  for (const auto& s : seats_) {
    if (!s) return false;
  }
  return true;
}

void write_strategy(std::ostream& os, const BehaviorStrategy& strategy) {
  const auto& spec = *strategy.spec();
  os << "# game=" << spec.name() << " players=" << spec.num_players()
     << " player=" << strategy.player() << "\n";
  for (const auto& [key, probs] : strategy.table()) {
    os << key;
    for (Eigen::Index i = 0; i < probs.size(); ++i) os << ' ' << format_double(probs(i));
    os << '\n';
  }
}

std::vector<BehaviorStrategy> read_strategies(std::istream& is) {
  std::vector<BehaviorStrategy> out;
  GameSpecPtr spec;
  int player = -1;
  BehaviorStrategy::Table table;
  auto flush = [&] {
    if (spec) out.emplace_back(spec, player, std::move(table));
    table.clear();
  };
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      flush();
      std::istringstream hs(line.substr(1));
      std::string field;
      std::string game;
      while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto name = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (name == "game") game = value;
        if (name == "player") player = std::stoi(value);
      }
      if (game.empty() || player < 0) throw std::runtime_error("bad strategy header: " + line);
      spec = GameSpec::parse(game);
      continue;
    }
    if (!spec) throw std::runtime_error("strategy record before header");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<double> probs;
    double v;
    while (ls >> v) probs.push_back(v);
    table.emplace(key, Eigen::Map<const VectorXd>(probs.data(),
                                                  static_cast<Eigen::Index>(probs.size())));
  }
  flush();
  return out;
}

void save_strategies(const std::string& path,
                     const std::vector<BehaviorStrategy>& strategies) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const auto& s : strategies) write_strategy(os, s);
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<BehaviorStrategy> load_strategies(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_strategies(is);
}

}  // namespace ice
