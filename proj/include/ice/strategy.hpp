#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ice/common.hpp"
#include "ice/game.hpp"

namespace ice {

// sigma_i: one probability vector per information set of `player`, indexed
// by position in the infoset's canonical legal-action list.
class BehaviorStrategy {
 public:
  using Table = std::map<InfoSetKey, VectorXd>;

  BehaviorStrategy() = default;
  // Throws std::invalid_argument unless every infoset of `player` is covered
  // with a nonnegative vector of the right length summing to 1 (1e-9).
  BehaviorStrategy(GameSpecPtr spec, int player, Table table);

  static BehaviorStrategy uniform(const GameSpecPtr& spec, int player);
  // Plays the given action id with probability 1 at each listed infoset;
  // unlisted infosets play their lowest action id.
  static BehaviorStrategy pure(const GameSpecPtr& spec, int player,
                               const std::map<InfoSetKey, int>& choice);

  const GameSpecPtr& spec() const { return spec_; }
  int player() const { return player_; }
  const Table& table() const { return table_; }
  // Throws std::out_of_range for unknown keys.
  const VectorXd& at(const InfoSetKey& key) const;

  friend bool operator==(const BehaviorStrategy& a, const BehaviorStrategy& b);

 private:
  GameSpecPtr spec_;
  int player_ = -1;
  Table table_;
};

// sigma = (sigma_1, ..., sigma_n); seats may be left empty for partial
// profiles (e.g. the opponents handed to a best-response computation).
class StrategyProfile {
 public:
  explicit StrategyProfile(int num_players = 0) : seats_(num_players) {}
  explicit StrategyProfile(std::vector<BehaviorStrategy> strategies);

  int num_players() const { return static_cast<int>(seats_.size()); }
  void set(BehaviorStrategy strategy);
  bool has(int player) const { return seats_.at(player).has_value(); }
  const BehaviorStrategy& at(int player) const;
  bool complete() const;

 private:
  std::vector<std::optional<BehaviorStrategy>> seats_;
};

// Text persistence. One block per strategy:
//   # game=<name> players=<n> player=<i>
//   <InfoSetKey> <p1> <p2> ...        (sorted by key, 17 significant digits)
void write_strategy(std::ostream& os, const BehaviorStrategy& strategy);
// Reads every block in the stream.
std::vector<BehaviorStrategy> read_strategies(std::istream& is);

void save_strategies(const std::string& path,
                     const std::vector<BehaviorStrategy>& strategies);
std::vector<BehaviorStrategy> load_strategies(const std::string& path);

}  // namespace ice
