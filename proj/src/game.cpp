#include "ice/game.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ice/common.hpp"

namespace ice {
namespace {

const char* kRankNames = "JQKA";
const char* kSuitNames = "sh";

void ordered_deals(int deck, int players, std::vector<int>& prefix,
                   std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == players) {
    out.push_back(prefix);
    return;
  }
  for (int c = 0; c < deck; ++c) {
    if (std::find(prefix.begin(), prefix.end(), c) != prefix.end()) continue;
    prefix.push_back(c);
    ordered_deals(deck, players, prefix, out);
    prefix.pop_back();
  }
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += '-';
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------- GameSpec

GameSpec::GameSpec(GameId id, int num_players)
    : id_(id), num_players_(num_players) {
  switch (id) {
    case GameId::RPS:
      name_ = "rps";
      max_utility_ = 1.0;
      break;
    case GameId::Kuhn:
      name_ = "kuhn";
      poker_ = PokerRules{num_players + 1, 1, 1, 1, {1, 1}, 1};
      max_utility_ = 2.0 * (num_players - 1);
      break;
    case GameId::Leduc:
      name_ = "leduc";
      poker_ = PokerRules{num_players + 1, 2, 2, 1, {2, 4}, 2};
      // Largest contribution: ante + two raises in each round.
      max_utility_ = 13.0 * (num_players - 1);
      break;
    case GameId::Goofspiel:
      name_ = "goof";
      // 15 points available; 3p payoffs are normalized by the mean.
      max_utility_ = num_players == 2 ? 15.0 : 10.0;
      break;
  }
  name_ += std::to_string(num_players);
  if (is_poker()) {
    std::vector<int> prefix;
    ordered_deals(deck_size(), num_players, prefix, deals_);
  }
}

std::shared_ptr<const GameSpec> GameSpec::make(GameId id, int num_players) {
  const bool ok = id == GameId::RPS ? num_players == 2
                                    : (num_players == 2 || num_players == 3);
  if (!ok) {
    throw std::invalid_argument("unsupported player count " +
                                std::to_string(num_players) + " for game");
  }
  return std::shared_ptr<const GameSpec>(new GameSpec(id, num_players));
}

std::shared_ptr<const GameSpec> GameSpec::parse(std::string_view name) {
  static const std::pair<std::string_view, GameId> kNames[] = {
      {"rps", GameId::RPS},
      {"kuhn", GameId::Kuhn},
      {"leduc", GameId::Leduc},
      {"goof", GameId::Goofspiel}};
  for (const auto& [prefix, id] : kNames) {
    if (name.size() == prefix.size() + 1 && name.substr(0, prefix.size()) == prefix) {
      const char c = name.back();
      if (c >= '0' && c <= '9') return make(id, c - '0');
    }
  }
  throw std::invalid_argument("unknown game '" + std::string(name) + "'");
}

int GameSpec::num_actions() const {
  switch (id_) {
    case GameId::RPS:
      return 3;
    case GameId::Kuhn:
    case GameId::Leduc:
      return 3;
    case GameId::Goofspiel:
      return kGoofCards;
  }
  return 0;
}

std::string GameSpec::card_name(int card) const {
  std::string s(1, kRankNames[card / poker_.suits]);
  if (poker_.suits > 1) s += kSuitNames[card % poker_.suits];
  return s;
}

// --------------------------------------------------------------- GameState

GameState::GameState(GameSpecPtr spec) : spec_(std::move(spec)) {
  if (!spec_) throw std::invalid_argument("null game spec");
  const int n = spec_->num_players();
  switch (spec_->id()) {
    case GameId::RPS:
      data_ = detail::RpsData{};
      current_ = 0;
      break;
    case GameId::Kuhn:
    case GameId::Leduc: {
      detail::PokerData d;
      d.cards.assign(n, -1);
      d.contrib.assign(n, spec_->poker().ante);
      d.folded.assign(n, 0);
      data_ = std::move(d);
      current_ = kChancePlayer;
      break;
    }
    case GameId::Goofspiel: {
      detail::GoofData d;
      d.hands.assign(n, (1u << GameSpec::kGoofCards) - 1);
      d.points.assign(n, 0);
      d.own_bids.assign(n, std::string());
      data_ = std::move(d);
      current_ = 0;
      break;
    }
  }
}

bool GameState::facing_bet(int player) const {
  const auto& d = std::get<detail::PokerData>(data_);
  const int top = *std::max_element(d.contrib.begin(), d.contrib.end());
  return d.contrib[player] < top;
}

std::vector<int> GameState::legal_actions() const {
  if (is_terminal()) {
    throw std::logic_error("legal_actions called on a terminal state");
  }
  if (is_chance()) {
    std::vector<int> out;
    for (const auto& [a, p] : chance_outcomes()) out.push_back(a);
    return out;
  }
  switch (spec_->id()) {
    case GameId::RPS:
      return {kRock, kPaper, kScissors};
    case GameId::Kuhn:
    case GameId::Leduc: {
      const auto& d = std::get<detail::PokerData>(data_);
      std::vector<int> out;
      if (facing_bet(current_)) out.push_back(kFold);
      out.push_back(kCall);
      if (d.raises < spec_->poker().raise_cap) out.push_back(kRaise);
      return out;
    }
    case GameId::Goofspiel: {
      const auto& d = std::get<detail::GoofData>(data_);
      std::vector<int> out;
      for (int v = 0; v < GameSpec::kGoofCards; ++v) {
        if (d.hands[current_] & (1u << v)) out.push_back(v);
      }
      return out;
    }
  }
  return {};
}

std::vector<std::pair<int, double>> GameState::chance_outcomes() const {
  if (!is_chance()) throw std::logic_error("not a chance node");
  const auto& d = std::get<detail::PokerData>(data_);
  std::vector<std::pair<int, double>> out;
  if (!d.awaiting_public) {
    const auto& deals = spec_->deals();
    const double p = 1.0 / static_cast<double>(deals.size());
    for (int i = 0; i < static_cast<int>(deals.size()); ++i) out.emplace_back(i, p);
    return out;
  }
  std::vector<int> remaining;
  for (int c = 0; c < spec_->deck_size(); ++c) {
    if (std::find(d.cards.begin(), d.cards.end(), c) == d.cards.end()) {
      remaining.push_back(c);
    }
  }
  const double p = 1.0 / static_cast<double>(remaining.size());
  for (int c : remaining) out.emplace_back(c, p);
  return out;
}

GameState GameState::child(int action) const {
  if (is_terminal()) throw std::logic_error("apply_action on a terminal state");
  const auto legal = legal_actions();
  if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
    throw std::invalid_argument("illegal action " + std::to_string(action) +
                                " at " + to_string());
  }
  GameState next = *this;
  next.apply_in_place(action);
  return next;
}

void GameState::apply_in_place(int action) {
  history_.push_back(action);
  switch (spec_->id()) {
    case GameId::RPS: {
      auto& d = std::get<detail::RpsData>(data_);
      d.moves[current_] = action;
      current_ = current_ == 0 ? 1 : kTerminalPlayer;
      break;
    }
    case GameId::Kuhn:
    case GameId::Leduc:
      apply_poker(action);
      break;
    case GameId::Goofspiel:
      apply_goof(action);
      break;
  }
}

void GameState::apply_poker(int action) {
  auto& d = std::get<detail::PokerData>(data_);
  const PokerRules& rules = spec_->poker();
  const int n = spec_->num_players();
  auto active_count = [&] {
    return static_cast<int>(std::count(d.folded.begin(), d.folded.end(), 0));
  };
  auto first_active_from = [&](int seat) {
    for (int k = 0; k < n; ++k) {
      const int p = (seat + k) % n;
      if (!d.folded[p]) return p;
    }
    return -1;
  };

  if (current_ == kChancePlayer) {
    if (!d.awaiting_public) {
      d.cards = spec_->deals()[action];
    } else {
      d.public_card = action;
      d.awaiting_public = false;
      d.round = 1;
      d.raises = 0;
      d.public_tokens.push_back(spec_->card_name(action));
    }
    d.pending = active_count();
    current_ = first_active_from(0);
    return;
  }

  const int p = current_;
  const int top = *std::max_element(d.contrib.begin(), d.contrib.end());
  const bool facing = d.contrib[p] < top;
  switch (action) {
    case kFold:
      d.folded[p] = 1;
      d.pending -= 1;
      d.public_tokens.emplace_back("fold");
      break;
    case kCall:
      d.contrib[p] = top;
      d.pending -= 1;
      d.public_tokens.emplace_back(facing ? "call" : "check");
      break;
    case kRaise:
      d.contrib[p] = top + rules.raise_size[d.round];
      d.raises += 1;
      d.pending = active_count() - 1;
      d.public_tokens.emplace_back(facing ? "raise" : "bet");
      break;
    default:
      throw std::invalid_argument("bad poker action");
  }

  if (active_count() == 1) {
    current_ = kTerminalPlayer;
  } else if (d.pending == 0) {
    if (d.round + 1 < rules.rounds) {
      d.awaiting_public = true;
      current_ = kChancePlayer;
    } else {
      current_ = kTerminalPlayer;
    }
  } else {
    current_ = first_active_from(p + 1);
  }
}

void GameState::apply_goof(int action) {
  auto& d = std::get<detail::GoofData>(data_);
  const int n = spec_->num_players();
  d.hands[current_] &= ~(1u << action);
  d.bids.push_back(action + 1);
  if (static_cast<int>(d.bids.size()) < n) {
    current_ += 1;
    return;
  }
  const int prize = GameSpec::kGoofCards - d.round;
  const int best = *std::max_element(d.bids.begin(), d.bids.end());
  if (std::count(d.bids.begin(), d.bids.end(), best) == 1) {
    const auto winner = std::find(d.bids.begin(), d.bids.end(), best) - d.bids.begin();
    d.points[winner] += prize;
  }
  if (std::count(d.bids.begin(), d.bids.end(), best) == 1) {
    d.public_tokens.push_back(
        "p" + std::to_string(std::find(d.bids.begin(), d.bids.end(), best) - d.bids.begin()));
  } else {
    d.public_tokens.emplace_back("tie");
  }
  for (int p = 0; p < n; ++p) d.own_bids[p] += static_cast<char>('0' + d.bids[p]);
  d.bids.clear();
  d.round += 1;
  current_ = d.round == GameSpec::kGoofCards ? kTerminalPlayer : 0;
}

std::vector<double> GameState::poker_returns() const {
  const auto& d = std::get<detail::PokerData>(data_);
  const int n = spec_->num_players();
  const double pot = std::accumulate(d.contrib.begin(), d.contrib.end(), 0.0);
  std::vector<int> strength(n, -1);
  for (int p = 0; p < n; ++p) {
    if (d.folded[p]) continue;
    const int rank = d.cards[p] / spec_->poker().suits;
    const bool pair =
        d.public_card >= 0 && d.public_card / spec_->poker().suits == rank;
    strength[p] = pair ? 100 + rank : rank;
  }
  const int best = *std::max_element(strength.begin(), strength.end());
  const int winners = static_cast<int>(std::count(strength.begin(), strength.end(), best));
  std::vector<double> out(n);
  for (int p = 0; p < n; ++p) {
    out[p] = (strength[p] == best ? pot / winners : 0.0) - d.contrib[p];
  }
  return out;
}

std::vector<double> GameState::returns() const {
  if (!is_terminal()) throw std::logic_error("returns called on a non-terminal state");
  const int n = spec_->num_players();
  switch (spec_->id()) {
    case GameId::RPS: {
      const auto& d = std::get<detail::RpsData>(data_);
      const int diff = (d.moves[0] - d.moves[1] + 3) % 3;
      const double u0 = diff == 0 ? 0.0 : (diff == 1 ? 1.0 : -1.0);
      return {u0, -u0};
    }
    case GameId::Kuhn:
    case GameId::Leduc:
      return poker_returns();
    case GameId::Goofspiel: {
      const auto& d = std::get<detail::GoofData>(data_);
      std::vector<double> out(n);
      if (n == 2) {
        out[0] = d.points[0] - d.points[1];
        out[1] = -out[0];
      } else {
        const double mean = std::accumulate(d.points.begin(), d.points.end(), 0.0) / n;
        for (int p = 0; p < n; ++p) out[p] = d.points[p] - mean;
      }
      return out;
    }
  }
  return {};
}

InfoSetKey GameState::infoset_key(int player) const {
  if (player < 0 || player >= spec_->num_players()) {
    throw std::invalid_argument("bad player index");
  }
  std::string priv;
  std::string pub;
  switch (spec_->id()) {
    case GameId::RPS:
      break;
    case GameId::Kuhn:
    case GameId::Leduc: {
      const auto& d = std::get<detail::PokerData>(data_);
      if (d.cards[player] >= 0) priv = spec_->card_name(d.cards[player]);
      pub = join(d.public_tokens);
      break;
    }
    case GameId::Goofspiel: {
      const auto& d = std::get<detail::GoofData>(data_);
      priv = d.own_bids[player];
      pub = join(d.public_tokens);
      break;
    }
  }
  return spec_->name() + "/" + std::to_string(player) + "/" + priv + "/" + pub;
}

std::string GameState::action_name(int action) const {
  if (is_chance()) {
    const auto& d = std::get<detail::PokerData>(data_);
    if (d.awaiting_public) return spec_->card_name(action);
    std::string s;
    for (int c : spec_->deals()[action]) s += spec_->card_name(c);
    return s;
  }
  switch (spec_->id()) {
    case GameId::RPS:
      return std::string(1, "RPS"[action]);
    case GameId::Kuhn:
    case GameId::Leduc: {
      const bool facing = facing_bet(current_);
      if (action == kFold) return "fold";
      if (action == kCall) return facing ? "call" : "check";
      return facing ? "raise" : "bet";
    }
    case GameId::Goofspiel:
      return std::to_string(action + 1);
  }
  return "?";
}

std::string GameState::to_string() const {
  std::ostringstream os;
  os << spec_->name() << "[";
  for (std::size_t i = 0; i < history_.size(); ++i) os << (i ? " " : "") << history_[i];
  os << "]";
  return os.str();
}

GameState initial_state(GameSpecPtr spec) { return GameState(std::move(spec)); }
std::vector<int> legal_actions(const GameState& state) { return state.legal_actions(); }
GameState apply_action(const GameState& state, int action) { return state.child(action); }
std::vector<double> returns(const GameState& state) { return state.returns(); }
InfoSetKey infoset_key(const GameState& state, int player) {
  return state.infoset_key(player);
}

int infoset_player(std::string_view key) {
  const auto parts = split(key, '/');
  if (parts.size() != 4) throw std::invalid_argument("malformed infoset key");
  return std::stoi(parts[1]);
}

}  // namespace ice
