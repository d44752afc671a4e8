#include "ice/exploit_rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ice/solvers.hpp"

namespace ice {

// ---------------------------------------------------------------- history IO

void validate_history(const LearningHistory& h, const GameSpec& spec) {
  int episodes = 0;
  const double bound = spec.max_utility() + 1e-9;
  for (std::size_t i = 0; i < h.steps.size(); ++i) {
    const auto& s = h.steps[i];
    if (!s.done && s.reward != 0.0) {
      throw std::invalid_argument("nonzero reward on a non-terminal step " + std::to_string(i));
    }
    if (std::abs(s.reward) > bound) throw std::invalid_argument("reward out of bounds");
    if (s.done) ++episodes;
  }
  if (!h.steps.empty() && !h.steps.back().done) {
    throw std::invalid_argument("history ends mid-episode");
  }
  if (episodes != h.episodes) throw std::invalid_argument("episode count mismatch");
}

void write_history(std::ostream& os, const LearningHistory& h) {
  os << "# task=" << h.task_id << " seed=" << hex64(h.seed) << " episodes=" << h.episodes
     << " config=" << h.config_hash << "\n";
  for (const auto& s : h.steps) {
    os << s.infoset << '\t' << s.action << '\t' << format_double(s.reward) << '\t'
       << (s.done ? 1 : 0) << '\n';
  }
}

LearningHistory read_history(std::istream& is) {
  LearningHistory h;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string field;
      while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto name = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (name == "task") h.task_id = value;
        if (name == "seed") h.seed = std::stoull(value, nullptr, 16);
        if (name == "episodes") h.episodes = std::stoi(value);
        if (name == "config") h.config_hash = value;
      }
      header = true;
      continue;
    }
    const auto f = split(line, '\t');
    if (f.size() != 4) throw std::runtime_error("bad history line: " + line);
    h.steps.push_back({f[0], std::stoi(f[1]), std::stod(f[2]), f[3] == "1"});
  }
  if (!header) throw std::runtime_error("history without header");
  return h;
}

void save_history(const std::string& path, const LearningHistory& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_history(os, h);
  if (!os) throw std::runtime_error("write failed: " + path);
}

LearningHistory load_history(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_history(is);
}

// --------------------------------------------------------------- environment

namespace {

// Walks the compiled tree; the "state" is a node id.
struct TreeWalker {
  const GameTree& tree;
  const TabularProfile& opp;
  int seat;

  // Samples chance and opponent moves from `id` until the exploiter acts or
  // a terminal is reached.
  std::uint32_t advance(std::uint32_t id, Rng& rng) const {
    while (true) {
      const auto& node = tree.nodes()[id];
      if (node.player == kTerminalPlayer || node.player == seat) return id;
      double u = uniform01(rng);
      int pick = node.num_children - 1;
      for (int k = 0; k < node.num_children; ++k) {
        const double p = node.player == kChancePlayer ? tree.nodes()[node.first_child + k].chance_prob
                                                      : opp[node.player][node.index](k);
        u -= p;
        if (u < 0.0) {
          pick = k;
          break;
        }
      }
      // Floating-point slack must never select a zero-probability branch.
      while (pick > 0 && (node.player == kChancePlayer
                              ? tree.nodes()[node.first_child + pick].chance_prob
                              : opp[node.player][node.index](pick)) == 0.0) {
        --pick;
      }
      id = node.first_child + pick;
    }
  }
};

TabularProfile opponent_table(const GameTree& tree, const OpponentTask& task) {
  validate_task(task);
  StrategyProfile others(tree.num_players());
  for (int p = 0; p < tree.num_players(); ++p) {
    if (p != task.exploiter_seat) others.set(task.opponents.at(p));
  }
  return tabulate(tree, others);
}

}  // namespace

Environment::Environment(OpponentTask task, std::uint64_t seed)
    : task_(std::move(task)),
      tree_(GameTree::get(task_.spec)),
      opp_(opponent_table(*tree_, task_)),
      rng_(seed),
      state_(task_.spec) {}

Environment::Observation Environment::advance() {
  const int seat = task_.exploiter_seat;
  while (!state_.is_terminal() && state_.current_player() != seat) {
    const int p = state_.current_player();
    if (p == kChancePlayer) {
      const auto outcomes = state_.chance_outcomes();
      VectorXd w(static_cast<Eigen::Index>(outcomes.size()));
      for (std::size_t i = 0; i < outcomes.size(); ++i) w(static_cast<Eigen::Index>(i)) = outcomes[i].second;
      state_ = state_.child(outcomes[sample_index(w, rng_)].first);
    } else {
      const int idx = tree_->infoset_index(p, state_.infoset_key(p));
      const auto legal = state_.legal_actions();
      state_ = state_.child(legal[sample_index(opp_[p][idx], rng_)]);
    }
  }
  Observation obs;
  if (state_.is_terminal()) {
    obs.done = true;
    obs.reward = state_.returns()[seat];
    active_ = false;
  } else {
    obs.infoset = state_.infoset_key(seat);
    obs.legal = state_.legal_actions();
  }
  return obs;
}

Environment::Observation Environment::reset() {
  state_ = GameState(task_.spec);
  active_ = true;
  return advance();
}

Environment::Observation Environment::step(int action) {
  if (!active_) throw std::invalid_argument("step on a finished episode; call reset()");
  const auto legal = state_.legal_actions();
  if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
    throw std::invalid_argument("illegal exploiter action " + std::to_string(action));
  }
  state_ = state_.child(action);
  return advance();
}

Environment make_env(const OpponentTask& task, std::uint64_t seed) { return Environment(task, seed); }

// ------------------------------------------------------------------- learner

void LearnerConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("clip must lie in (0, 1)");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must lie in (0, 1]");
  if (entropy_coef < 0.0) throw std::invalid_argument("entropy_coef must be >= 0");
  if (!(value_coef > 0.0)) throw std::invalid_argument("value_coef must be > 0");
  if (batch_episodes < 1) throw std::invalid_argument("batch_episodes must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
}

TabularPolicy TabularPolicy::zeros(const GameSpecPtr& spec, int seat) {
  TabularPolicy p{spec, seat, {}};
  for (const auto& info : GameTree::get(spec)->infosets(seat)) {
    p.logits.push_back(VectorXd::Zero(static_cast<Eigen::Index>(info.legal.size())));
  }
  return p;
}

VectorXd TabularPolicy::probs(int infoset_index) const {
  const VectorXd& z = logits[infoset_index];
  VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

BehaviorStrategy TabularPolicy::to_strategy() const {
  std::vector<VectorXd> table;
  for (std::size_t i = 0; i < logits.size(); ++i) table.push_back(probs(static_cast<int>(i)));
  return untabulate(*GameTree::get(spec), seat, table);
}

namespace {

struct Adam {
  double lr;
  double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long t = 0;

  void apply(VectorXd& param, const VectorXd& grad, VectorXd& m, VectorXd& v) const {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

struct Sample {
  int infoset;
  int pos;
  double old_logp;
  double ret;
};

}  // namespace

LearnerResult run_learner(const OpponentTask& task, const LearnerConfig& config,
                          const TabularPolicy* init) {
  config.validate();
  const auto tree = GameTree::get(task.spec);
  const TabularProfile opp = opponent_table(*tree, task);
  const int seat = task.exploiter_seat;
  const auto& infos = tree->infosets(seat);
  const TreeWalker walker{*tree, opp, seat};

  TabularPolicy policy = init ? *init : TabularPolicy::zeros(task.spec, seat);
  if (policy.seat != seat || policy.logits.size() != infos.size()) {
    throw std::invalid_argument("initial policy does not match the task");
  }
  std::vector<double> value(infos.size(), 0.0);
  std::vector<VectorXd> m_logit, v_logit;
  for (const auto& z : policy.logits) {
    m_logit.push_back(VectorXd::Zero(z.size()));
    v_logit.push_back(VectorXd::Zero(z.size()));
  }
  std::vector<double> m_val(infos.size(), 0.0), v_val(infos.size(), 0.0);
  Adam adam{config.learning_rate};

  Rng rng(config.seed);
  LearnerResult out;
  out.history.task_id = task.task_id;
  out.history.seed = config.seed;
  out.history.episodes = config.episodes;

  std::vector<VectorXd> probs(infos.size());
  auto refresh = [&] {
    for (std::size_t i = 0; i < infos.size(); ++i) probs[i] = policy.probs(static_cast<int>(i));
  };
  auto exact_value = [&] {
    TabularProfile prof = opp;
    prof[seat] = probs;
    return expected_value(*tree, prof)(seat);
  };

  std::vector<Sample> batch;
  int done_episodes = 0;
  while (done_episodes < config.episodes) {
    refresh();
    const int n_batch = std::min(config.batch_episodes, config.episodes - done_episodes);
    const double batch_value = config.track_exact_values ? exact_value() : 0.0;
    batch.clear();
    for (int e = 0; e < n_batch; ++e) {
      std::uint32_t id = walker.advance(0, rng);
      const std::size_t first = batch.size();
      double reward = 0.0;
      while (true) {
        const auto& node = tree->nodes()[id];
        if (node.player == kTerminalPlayer) {
          reward = tree->utility(node.index)[seat];
          break;
        }
        const int idx = node.index;
        const int pos = sample_index(probs[idx], rng);
        batch.push_back({idx, pos, std::log(probs[idx](pos)), 0.0});
        out.history.steps.push_back({infos[idx].key, infos[idx].legal[pos], 0.0, false});
        id = walker.advance(node.first_child + pos, rng);
      }
      if (batch.size() == first) {
        throw std::logic_error("episode without an exploiter decision");
      }
      out.history.steps.back().reward = reward;
      out.history.steps.back().done = true;
      double g = reward;
      for (std::size_t i = batch.size(); i-- > first;) {
        batch[i].ret = g;
        g *= config.discount;
      }
      out.episode_returns.push_back(reward);
      if (config.track_exact_values) out.episode_expected.push_back(batch_value);
    }
    done_episodes += n_batch;

    std::vector<double> adv(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) adv[i] = batch[i].ret - value[batch[i].infoset];
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::vector<VectorXd> g_logit(infos.size());
      std::vector<double> g_val(infos.size(), 0.0);
      std::vector<char> touched(infos.size(), 0);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const Sample& s = batch[i];
        const VectorXd pi = policy.probs(s.infoset);
        if (!touched[s.infoset]) {
          g_logit[s.infoset] = VectorXd::Zero(pi.size());
          touched[s.infoset] = 1;
        }
        VectorXd& g = g_logit[s.infoset];
        const double ratio = std::exp(std::log(pi(s.pos)) - s.old_logp);
        const double a = adv[i];
        const bool clipped = (a >= 0.0 && ratio > 1.0 + config.clip) ||
                             (a < 0.0 && ratio < 1.0 - config.clip);
        if (!clipped) {
          // d(-ratio * A)/dz = -A * ratio * (e_pos - pi)
          g -= inv_n * a * ratio * (-pi);
          g(s.pos) -= inv_n * a * ratio;
        }
        if (config.entropy_coef > 0.0) {
          const VectorXd logpi = pi.array().max(1e-300).log().matrix();
          const double h = -pi.dot(logpi);
          g += inv_n * config.entropy_coef * (pi.array() * (logpi.array() + h)).matrix();
        }
        g_val[s.infoset] += inv_n * 2.0 * config.value_coef * (value[s.infoset] - s.ret);
      }
      ++adam.t;
      for (std::size_t k = 0; k < infos.size(); ++k) {
        if (!touched[k]) continue;
        adam.apply(policy.logits[k], g_logit[k], m_logit[k], v_logit[k]);
        VectorXd pv(1), gv(1), mv(1), vv(1);
        pv << value[k];
        gv << g_val[k];
        mv << m_val[k];
        vv << v_val[k];
        adam.apply(pv, gv, mv, vv);
        value[k] = pv(0);
        m_val[k] = mv(0);
        v_val[k] = vv(0);
      }
    }
  }
  out.final_policy = std::move(policy);
  return out;
}

// ---------------------------------------------------------------- evaluation

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  r.n = static_cast<int>(xs.size());
  if (xs.empty()) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  r.mean = sum / r.n;
  if (r.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (r.n - 1) / r.n);
  }
  return r;
}

MeanSe evaluate_policy(const OpponentTask& task, const ActFn& act, int episodes,
                       std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy needs episodes >= 1");
  Environment env(task, derive_seed(seed, "env"));
  Rng rng(derive_seed(seed, "policy"));
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    auto obs = env.reset();
    while (!obs.done) {
      const int pos = act(obs.infoset, obs.legal, rng);
      obs = env.step(obs.legal.at(static_cast<std::size_t>(pos)));
    }
    returns.push_back(obs.reward);
  }
  return mean_se(returns);
}

MeanSe evaluate_policy(const OpponentTask& task, const BehaviorStrategy& policy, int episodes,
                       std::uint64_t seed) {
  if (policy.player() != task.exploiter_seat) {
    throw std::invalid_argument("policy seat differs from the task's exploiter seat");
  }
  return evaluate_policy(
      task,
      [&](const InfoSetKey& key, const std::vector<int>&, Rng& rng) {
        return sample_index(policy.at(key), rng);
      },
      episodes, seed);
}

double task_value(const OpponentTask& task, const BehaviorStrategy& policy) {
  StrategyProfile prof = task.opponents;
  prof.set(policy);
  return expected_value(task.spec, prof)(task.exploiter_seat);
}

double task_best_response_value(const OpponentTask& task) {
  return best_response(task.spec, task.opponents, task.exploiter_seat).value;
}

}  // namespace ice
