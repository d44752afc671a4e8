#pragma once

// Immutable extensive-form game engine: rock-paper-scissors, 2/3-player
// Kuhn and Leduc poker, and 2/3-player 5-card Goofspiel.
//
// Simultaneous moves (RPS throws, Goofspiel bids) are sequentialized; a later
// mover's information set hides the choices made earlier in the same round.
// Goofspiel reveals only each round's winner (or a tie); bids stay private.

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace ice {

enum class GameId { RPS, Kuhn, Leduc, Goofspiel };

inline constexpr int kChancePlayer = -1;
inline constexpr int kTerminalPlayer = -2;

// Poker action ids, canonical order fold < check/call < bet/raise.
inline constexpr int kFold = 0;
inline constexpr int kCall = 1;
inline constexpr int kRaise = 2;

// RPS action ids.
inline constexpr int kRock = 0;
inline constexpr int kPaper = 1;
inline constexpr int kScissors = 2;

struct PokerRules {
  int ranks = 3;
  int suits = 1;
  int rounds = 1;
  int ante = 1;
  std::array<int, 2> raise_size{1, 1};
  int raise_cap = 1;
};

class GameSpec {
 public:
  // Throws std::invalid_argument for unsupported (game, players) pairs.
  static std::shared_ptr<const GameSpec> make(GameId id, int num_players);
  // Accepts "rps2", "kuhn2", "kuhn3", "leduc2", "leduc3", "goof2", "goof3".
  static std::shared_ptr<const GameSpec> parse(std::string_view name);

  GameId id() const { return id_; }
  int num_players() const { return num_players_; }
  // Short name used in infoset keys and file headers, e.g. "kuhn2".
  const std::string& name() const { return name_; }

  // Player action ids lie in [0, num_actions()).
  int num_actions() const;
  // Upper bound on |u_i(z)| over all terminals.
  double max_utility() const { return max_utility_; }

  bool is_poker() const { return id_ == GameId::Kuhn || id_ == GameId::Leduc; }
  const PokerRules& poker() const { return poker_; }
  int deck_size() const { return poker_.ranks * poker_.suits; }
  // Ordered private deals (one card per player) for poker games.
  const std::vector<std::vector<int>>& deals() const { return deals_; }
  std::string card_name(int card) const;

  static constexpr int kGoofCards = 5;

 private:
  GameSpec(GameId id, int num_players);

  GameId id_;
  int num_players_;
  std::string name_;
  PokerRules poker_;
  std::vector<std::vector<int>> deals_;
  double max_utility_ = 0.0;
};

using GameSpecPtr = std::shared_ptr<const GameSpec>;

// "<game>/<player>/<private-obs>/<public-seq>", action tokens joined by '-'.
using InfoSetKey = std::string;

namespace detail {

struct RpsData {
  std::array<int, 2> moves{-1, -1};
};

struct PokerData {
  std::vector<int> cards;
  int public_card = -1;
  int round = 0;
  std::vector<int> contrib;
  std::vector<char> folded;
  int raises = 0;
  int pending = 0;  // players that must still act before the round closes
  bool awaiting_public = false;
  std::vector<std::string> public_tokens;
};

struct GoofData {
  std::vector<unsigned> hands;  // bit v-1 set while bid card v is held
  std::vector<int> points;
  std::vector<int> bids;        // bids placed in the current round
  std::vector<std::string> own_bids;  // completed-round bids, private
  int round = 0;
  std::vector<std::string> public_tokens;
};

}  // namespace detail

class GameState {
 public:
  explicit GameState(GameSpecPtr spec);

  const GameSpec& spec() const { return *spec_; }
  const GameSpecPtr& spec_ptr() const { return spec_; }

  // Player index, kChancePlayer or kTerminalPlayer.
  int current_player() const { return current_; }
  bool is_terminal() const { return current_ == kTerminalPlayer; }
  bool is_chance() const { return current_ == kChancePlayer; }
  const std::vector<int>& history() const { return history_; }

  std::vector<int> legal_actions() const;
  // (outcome id, probability) pairs at a chance node.
  std::vector<std::pair<int, double>> chance_outcomes() const;
  GameState child(int action) const;
  std::vector<double> returns() const;
  InfoSetKey infoset_key(int player) const;
  std::string action_name(int action) const;
  std::string to_string() const;

 private:
  void apply_in_place(int action);
  void apply_poker(int action);
  void apply_goof(int action);
  bool facing_bet(int player) const;
  std::vector<double> poker_returns() const;

  GameSpecPtr spec_;
  std::vector<int> history_;
  int current_ = 0;
  std::variant<detail::RpsData, detail::PokerData, detail::GoofData> data_;
};

GameState initial_state(GameSpecPtr spec);
std::vector<int> legal_actions(const GameState& state);
GameState apply_action(const GameState& state, int action);
std::vector<double> returns(const GameState& state);
InfoSetKey infoset_key(const GameState& state, int player);

struct InfoSetInfo {
  InfoSetKey key;
  std::vector<int> legal;
};

// Every information set of `player`, sorted by key.
std::vector<InfoSetInfo> enumerate_infosets(const GameSpecPtr& spec,
                                            int player);

// Splits "<game>/<player>/<private>/<public>" and returns the player field.
int infoset_player(std::string_view key);

}  // namespace ice
