#pragma once

// The ICE model M_theta: vocabulary, window encoding, Eq. (1) loss, the
// Algorithm 2 curriculum trainer, in-context acting, and checkpoint IO.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ice/exploit_rl.hpp"
#include "ice/opponents.hpp"
#include "ice/transformer.hpp"

namespace ice {

// Raised when an infoset key is not in the vocabulary.
struct VocabMiss : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Token bijections for one game, all seats: infoset key <-> id (seat-major,
// key order within a seat) and action id a <-> token a + 1 (token 0 = begin).
class TokenVocab {
 public:
  static constexpr int kBeginToken = 0;

  TokenVocab() = default;
  static TokenVocab for_game(const GameSpecPtr& spec);

  const std::string& game() const { return game_; }
  int num_infosets() const { return static_cast<int>(keys_.size()); }
  int num_actions() const { return num_actions_; }
  int num_action_tokens() const { return num_actions_ + 1; }
  int infoset_id(const InfoSetKey& key) const;  // throws VocabMiss
  const InfoSetKey& infoset_key(int id) const { return keys_.at(static_cast<std::size_t>(id)); }
  const LegalTable& legal() const { return legal_; }
  static int action_token(int action) { return action + 1; }
  static int token_action(int token) { return token - 1; }
  std::uint64_t hash() const;

  void save(const std::string& path) const;
  static TokenVocab load(const std::string& path);
  friend bool operator==(const TokenVocab& a, const TokenVocab& b) {
    return a.game_ == b.game_ && a.num_actions_ == b.num_actions_ && a.keys_ == b.keys_ &&
           a.legal_ == b.legal_;
  }

 private:
  void index();

  std::string game_;
  int num_actions_ = 0;
  std::vector<InfoSetKey> keys_;
  LegalTable legal_;
  std::unordered_map<InfoSetKey, int> ids_;
};

struct Architecture {
  int layers = 4;
  int heads = 4;
  int width = 128;
  int mlp = 512;
};

struct IceModel {
  TokenVocab vocab;
  ModelDims dims;
  AlignedVector<float> params;
  std::string config_hash;

  // Weights ~ N(0, 0.02) (residual projections scaled by 1/sqrt(2 layers)),
  // LayerNorm gains 1, biases 0, action head zero (uniform start).
  static IceModel init(const TokenVocab& vocab, const Architecture& arch, int context_length,
                       std::uint64_t seed);
  int context_length() const { return dims.max_positions; }
  std::uint64_t param_hash() const;
  const ParamLayout& layout() const;

 private:
  mutable std::shared_ptr<ParamLayout> layout_;
};

// Encodes history records as model positions. Position i carries infoset I_i
// and the (action, reward, done) of the record before it: `previous` for the
// first position (begin token when null, i.e. at the true history start).
// Targets are the recorded actions. Throws std::invalid_argument when the
// slice is longer than `context_length`, VocabMiss on unknown keys.
EncodedWindow encode_window(std::span<const StepRecord> slice, const StepRecord* previous,
                            const TokenVocab& vocab, int context_length);

// Live context for acting: the most recent context_length - 1 records plus
// the query infoset (no target) as the last position.
EncodedWindow encode_context(std::span<const StepRecord> context, const InfoSetKey& query,
                             const TokenVocab& vocab, int context_length);

struct DecodedStep {
  InfoSetKey infoset;
  int action = -1;  // -1 when the position has no target
};
std::vector<DecodedStep> decode_window(const EncodedWindow& w, const TokenVocab& vocab);

// Distribution over the legal actions of the infoset at `position`.
VectorXd forward(const IceModel& model, const EncodedWindow& w, int position);

struct LossAndGrad {
  double loss = 0.0;
  AlignedVector<float> grad;
};
// Eq. (1): mean over the batch of each window's mean NLL of its targets.
LossAndGrad nll_loss(const IceModel& model, const std::vector<EncodedWindow>& batch);

enum class ActMode { Sample, Greedy };

// Returns an action id legal at `infoset`. Parameters are never modified.
int act(const IceModel& model, std::span<const StepRecord> context, const InfoSetKey& infoset,
        ActMode mode, Rng& rng);

// Reusable evaluation-time helper holding a scratch transformer.
class IceActor {
 public:
  IceActor(const IceModel& model, int context_length);
  VectorXd probs(std::span<const StepRecord> context, const InfoSetKey& infoset);
  int act(std::span<const StepRecord> context, const InfoSetKey& infoset, ActMode mode, Rng& rng);
  int context_length() const { return context_length_; }

 private:
  const IceModel& model_;
  int context_length_;
  Transformer<float> tf_;
};

struct TrainConfig {
  double previous_rate = 0.1;  // sigma in Algorithm 2 (renamed: sigma denotes strategies elsewhere)
  int trains_per_task = 10;    // M
  int iterations = 0;          // T; 0 = auto (2 N)
  int context_length = 1000;
  int batch_size = 8;
  double learning_rate = 3e-4;
  double warmup_fraction = 0.02;
  double grad_clip = 1.0;      // global-norm clip; 0 disables
  bool train_first_step = true;  // also train the t = 0 prediction
  std::uint64_t seed = 0;
  Architecture arch;

  void validate() const;
  int resolved_iterations(int num_tasks) const { return iterations > 0 ? iterations : 2 * num_tasks; }
};

struct ScheduleStep {
  int iteration = 0;  // t, 1-based
  int episode = 0;    // p, 1-based within the iteration
  std::string task;
  bool review = false;     // drawn from D before exhaustion
  bool exhausted = false;  // |D| = N: uniform over D
};

// Algorithm 2's task-selection sequence (independent of the training step).
// Draw U; review iff U <= sigma and D is nonempty; otherwise the current task.
std::vector<ScheduleStep> curriculum_schedule(const std::vector<std::string>& order,
                                              double previous_rate, int trains_per_task,
                                              int iterations, std::uint64_t seed);

struct TrainResult {
  IceModel model;
  std::vector<ScheduleStep> schedule;
  std::vector<double> losses;  // one per training episode
};

using TrainProgress = std::function<void(std::size_t episode, const ScheduleStep&, double loss)>;

// Algorithm 2 with one Adam step on Eq. (1) per training episode; each
// episode samples `batch_size` random contiguous windows from the chosen
// task's history. Throws std::invalid_argument on a missing dataset and
// std::runtime_error on a non-finite loss.
TrainResult train_curriculum(const Curriculum& curriculum,
                             const std::map<std::string, LearningHistory>& datasets,
                             const TokenVocab& vocab, const TrainConfig& config,
                             const TrainProgress& progress = {});

// Samples a window ending at a uniform position, starting max(0, end - L + 1).
EncodedWindow sample_window(const LearningHistory& history, const TokenVocab& vocab,
                            int context_length, bool train_first_step, Rng& rng);

// Checkpoint: "ICECKPT1", u32 version, 8 x i32 dims, u32 dtype (0 = f32),
// u64 vocab hash, u32-length-prefixed config hash, u32 tensor count, then per
// tensor u32-length-prefixed name, i32 rows, i32 cols, rows*cols f32 values.
// All integers and floats little-endian.
void save_checkpoint(const std::string& path, const IceModel& model);
// The vocabulary must match the checkpoint's vocab hash.
IceModel load_checkpoint(const std::string& path, const TokenVocab& vocab);

}  // namespace ice
