#pragma once

// Each opponent task as a single-agent episodic RL problem, a tabular PPO
// learner, learning-history recording, and Monte-Carlo policy evaluation.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ice/game_tree.hpp"
#include "ice/opponents.hpp"

namespace ice {

struct StepRecord {
  InfoSetKey infoset;
  int action = 0;
  double reward = 0.0;  // nonzero only on the last step of an episode
  bool done = false;
};

// The concatenated D_i over a learner's whole training run.
struct LearningHistory {
  std::string task_id;
  std::uint64_t seed = 0;
  int episodes = 0;
  std::string config_hash;
  std::vector<StepRecord> steps;
};

// Throws std::invalid_argument when the stream is not a sequence of complete
// episodes with bounded returns and the episode count disagrees.
void validate_history(const LearningHistory& history, const GameSpec& spec);

void write_history(std::ostream& os, const LearningHistory& history);
LearningHistory read_history(std::istream& is);
void save_history(const std::string& path, const LearningHistory& history);
LearningHistory load_history(const std::string& path);

// Episodic environment: chance and opponent seats are sampled from their
// fixed distributions until the exploiter acts or the episode ends.
class Environment {
 public:
  struct Observation {
    InfoSetKey infoset;      // exploiter's view (empty when done)
    std::vector<int> legal;  // exploiter's legal actions (empty when done)
    double reward = 0.0;     // exploiter's return on the terminal step
    bool done = false;
  };

  Environment(OpponentTask task, std::uint64_t seed);

  Observation reset();
  // Throws std::invalid_argument on an illegal action or a finished episode.
  Observation step(int action);

  const OpponentTask& task() const { return task_; }

 private:
  Observation advance();

  OpponentTask task_;
  std::shared_ptr<const GameTree> tree_;
  TabularProfile opp_;
  Rng rng_;
  GameState state_;
  bool active_ = false;
};

Environment make_env(const OpponentTask& task, std::uint64_t seed);

struct LearnerConfig {
  int episodes = 3000;
  double learning_rate = 0.05;
  double clip = 0.2;
  double discount = 1.0;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int batch_episodes = 32;
  int epochs = 4;
  std::uint64_t seed = 0;
  // Also record the exact expected value of the behaviour policy per episode.
  bool track_exact_values = false;

  void validate() const;
};

// Softmax logits per exploiter infoset (dense tree index order).
struct TabularPolicy {
  GameSpecPtr spec;
  int seat = 0;
  std::vector<VectorXd> logits;

  static TabularPolicy zeros(const GameSpecPtr& spec, int seat);
  VectorXd probs(int infoset_index) const;
  BehaviorStrategy to_strategy() const;
};

struct LearnerResult {
  LearningHistory history;
  TabularPolicy final_policy;
  std::vector<double> episode_returns;
  std::vector<double> episode_expected;  // filled when track_exact_values
};

// Tabular PPO: clipped surrogate, per-infoset value baseline (advantage =
// return - V), entropy bonus, Adam. `init` optionally seeds the logits.
LearnerResult run_learner(const OpponentTask& task, const LearnerConfig& config,
                          const TabularPolicy* init = nullptr);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

MeanSe mean_se(const std::vector<double>& xs);

// Chooses an exploiter action index into `legal` at `infoset`.
using ActFn = std::function<int(const InfoSetKey& infoset, const std::vector<int>& legal, Rng& rng)>;

// Pure Monte-Carlo evaluation; throws std::invalid_argument when episodes < 1.
MeanSe evaluate_policy(const OpponentTask& task, const BehaviorStrategy& policy, int episodes,
                       std::uint64_t seed);
MeanSe evaluate_policy(const OpponentTask& task, const ActFn& act, int episodes,
                       std::uint64_t seed);

// Exact value of `policy` for the exploiter against the task's opponents.
double task_value(const OpponentTask& task, const BehaviorStrategy& policy);
// Exact best-response value for the exploiter seat.
double task_best_response_value(const OpponentTask& task);

}  // namespace ice
