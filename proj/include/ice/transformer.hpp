#pragma once

// Causal transformer core with hand-written backpropagation, templated on the
// scalar type (float for training and inference, double for gradient checks).
//
// Each timestep is one position whose input is the sum of
//   E_info[I_t] + E_act[a_{t-1}] + r_{t-1} W_rd[0] + done_{t-1} W_rd[1] + b_in + P[t],
// which equals a linear projection of the concatenated
// (infoset, previous action, previous reward, previous done) features.
// Blocks are pre-norm: x += Attn(LN(x)); x += MLP(LN(x)), GELU (tanh form),
// then a final LayerNorm and an action head masked to the legal actions.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ice {

struct ModelDims {
  int layers = 4;
  int heads = 4;
  int width = 128;
  int mlp = 512;
  int max_positions = 1000;
  int num_infosets = 0;
  int num_action_tokens = 0;  // num_actions + 1 (token 0 = begin)
  int num_actions = 0;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Named row-major tensors packed into one flat parameter vector.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelDims& dims);

  const ModelDims& dims() const { return dims_; }
  std::size_t size() const { return size_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& get(const std::string& name) const;

  // Offsets of frequently used tensors.
  struct LayerOffsets {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::size_t emb_info, emb_act, w_rd, b_in, pos, lnf_g, lnf_b, head_w, head_b;
  std::vector<LayerOffsets> layer;

 private:
  std::size_t add(const std::string& name, int rows, int cols);

  ModelDims dims_;
  std::vector<TensorInfo> tensors_;
  std::size_t size_ = 0;
};

// One model input: per-position token ids and scalar channels plus the
// recorded action to predict (-1 = no target, e.g. the live query).
struct EncodedWindow {
  std::vector<int> infoset;
  std::vector<int> prev_action;  // action token: 0 = begin, a + 1 otherwise
  std::vector<double> prev_reward;
  std::vector<double> prev_done;
  std::vector<int> target;
  std::size_t size() const { return infoset.size(); }
};

// legal[infoset token] = ascending legal action ids.
using LegalTable = std::vector<std::vector<int>>;

// Parameter and gradient buffers. Eigen's vectorized reductions peel to the
// buffer's alignment, so a fixed (maximal) alignment keeps float results
// independent of where the allocator happens to place the buffer.
template <typename S>
using AlignedVector = std::vector<S, Eigen::aligned_allocator<S>>;

template <typename S>
struct Workspace;

template <typename S>
class Transformer {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  Transformer(const ParamLayout& layout, const LegalTable& legal);
  ~Transformer();
  Transformer(const Transformer&) = delete;
  Transformer& operator=(const Transformer&) = delete;

  // Mean NLL over positions with a target. When `grad` is non-null the
  // gradient of that mean is ADDED to it (scaled by `grad_scale`).
  S loss(const S* params, const EncodedWindow& w, S* grad, S grad_scale = S(1));

  // Probabilities over the legal actions (legal order) at every position.
  std::vector<Vec> probabilities(const S* params, const EncodedWindow& w);
  // Probabilities at the last position only (inference fast path).
  Vec last_probabilities(const S* params, const EncodedWindow& w);

 private:
  void forward(const S* params, const EncodedWindow& w, bool full_last_layer);
  void check(const EncodedWindow& w) const;

  const ParamLayout& layout_;
  const LegalTable& legal_;
  Workspace<S>* ws_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace ice
