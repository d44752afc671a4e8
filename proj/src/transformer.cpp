#include "ice/transformer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ice {

void ModelDims::validate() const {
  if (layers < 1 || heads < 1 || width < 1 || mlp < 1 || max_positions < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (width % heads != 0) throw std::invalid_argument("width must be divisible by heads");
  if (num_infosets < 1 || num_actions < 1 || num_action_tokens != num_actions + 1) {
    throw std::invalid_argument("vocabulary dimensions are inconsistent");
  }
}

ParamLayout::ParamLayout(const ModelDims& dims) : dims_(dims) {
  dims_.validate();
  const int w = dims.width;
  emb_info = add("emb_info", dims.num_infosets, w);
  emb_act = add("emb_act", dims.num_action_tokens, w);
  w_rd = add("w_rd", 2, w);
  b_in = add("b_in", 1, w);
  pos = add("pos", dims.max_positions, w);
  for (int l = 0; l < dims.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerOffsets o{};
    o.ln1_g = add(p + "ln1_g", 1, w);
    o.ln1_b = add(p + "ln1_b", 1, w);
    o.wq = add(p + "wq", w, w);
    o.bq = add(p + "bq", 1, w);
    o.wk = add(p + "wk", w, w);
    o.bk = add(p + "bk", 1, w);
    o.wv = add(p + "wv", w, w);
    o.bv = add(p + "bv", 1, w);
    o.wo = add(p + "wo", w, w);
    o.bo = add(p + "bo", 1, w);
    o.ln2_g = add(p + "ln2_g", 1, w);
    o.ln2_b = add(p + "ln2_b", 1, w);
    o.w1 = add(p + "w1", w, dims.mlp);
    o.b1 = add(p + "b1", 1, dims.mlp);
    o.w2 = add(p + "w2", dims.mlp, w);
    o.b2 = add(p + "b2", 1, w);
    layer.push_back(o);
  }
  lnf_g = add("lnf_g", 1, w);
  lnf_b = add("lnf_b", 1, w);
  head_w = add("head_w", w, dims.num_actions);
  head_b = add("head_b", 1, dims.num_actions);
}

std::size_t ParamLayout::add(const std::string& name, int rows, int cols) {
  TensorInfo t{name, rows, cols, size_};
  size_ += t.size();
  tensors_.push_back(t);
  return t.offset;
}

const TensorInfo& ParamLayout::get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no tensor named " + name);
}

template <typename S>
struct Workspace {
  using Mat = typename Transformer<S>::Mat;
  using Vec = typename Transformer<S>::Vec;
  struct Layer {
    Mat xin, xhat1, y1, q, k, v, o, x1, xhat2, y2, hpre, hact;
    Vec rstd1, rstd2;
    std::vector<Mat> p;  // per-head attention weights
  };
  int t = 0;
  int first_row = 0;  // rows computed in the last layer (fast path: T-1)
  Mat x0;
  std::vector<Layer> layers;
  Mat xout, xhatf, z;
  Vec rstdf;
  std::vector<Vec> probs;  // over legal actions, per computed position
};

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

template <typename S, typename MatT, typename VecT>
void layer_norm(const MatT& x, const S* g, const S* b, int w, MatT& xhat, VecT& rstd, MatT& y) {
  const Eigen::Map<const RowVec<S>> gm(g, w);
  const Eigen::Map<const RowVec<S>> bm(b, w);
  xhat.resize(x.rows(), w);
  y.resize(x.rows(), w);
  rstd.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S mu = x.row(i).mean();
    const S var = (x.row(i).array() - mu).square().mean();
    rstd(i) = S(1) / std::sqrt(var + S(kLnEps));
    xhat.row(i) = (x.row(i).array() - mu) * rstd(i);
    y.row(i) = xhat.row(i).cwiseProduct(gm) + bm;
  }
}

// dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)), dxhat = dy * g.
template <typename S, typename MatT, typename VecT>
MatT layer_norm_back(const MatT& dy, const MatT& xhat, const VecT& rstd, const S* g, S* dg, S* db,
                     int w, S scale) {
  const Eigen::Map<const RowVec<S>> gm(g, w);
  MatT dx(dy.rows(), w);
  RowVec<S> sum_g = RowVec<S>::Zero(w);
  RowVec<S> sum_b = RowVec<S>::Zero(w);
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    sum_g += dy.row(i).cwiseProduct(xhat.row(i));
    sum_b += dy.row(i);
    const RowVec<S> dxhat = dy.row(i).cwiseProduct(gm);
    const S m1 = dxhat.mean();
    const S m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = rstd(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
  }
  if (dg) {
    Eigen::Map<RowVec<S>>(dg, w) += scale * sum_g;
    Eigen::Map<RowVec<S>>(db, w) += scale * sum_b;
  }
  return dx;
}

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::tanh(S(kGeluC) * (x + S(0.044715) * x * x * x)));
}

template <typename S>
S gelu_grad(S x) {
  const S u = S(kGeluC) * (x + S(0.044715) * x * x * x);
  const S t = std::tanh(u);
  return S(0.5) * (S(1) + t) +
         S(0.5) * x * (S(1) - t * t) * S(kGeluC) * (S(1) + S(3 * 0.044715) * x * x);
}

}  // namespace

template <typename S>
Transformer<S>::Transformer(const ParamLayout& layout, const LegalTable& legal)
    : layout_(layout), legal_(legal), ws_(new Workspace<S>()) {
  if (static_cast<int>(legal.size()) != layout.dims().num_infosets) {
    throw std::invalid_argument("legal table size differs from the infoset vocabulary");
  }
}

template <typename S>
Transformer<S>::~Transformer() {
  delete ws_;
}

template <typename S>
void Transformer<S>::check(const EncodedWindow& w) const {
  const auto& d = layout_.dims();
  const std::size_t t = w.size();
  if (t == 0) throw std::invalid_argument("empty window");
  if (static_cast<int>(t) > d.max_positions) throw std::invalid_argument("window longer than context");
  if (w.prev_action.size() != t || w.prev_reward.size() != t || w.prev_done.size() != t ||
      w.target.size() != t) {
    throw std::invalid_argument("ragged encoded window");
  }
  for (std::size_t i = 0; i < t; ++i) {
    if (w.infoset[i] < 0 || w.infoset[i] >= d.num_infosets) throw std::invalid_argument("bad infoset token");
    if (w.prev_action[i] < 0 || w.prev_action[i] >= d.num_action_tokens) {
      throw std::invalid_argument("bad action token");
    }
  }
}

template <typename S>
void Transformer<S>::forward(const S* params, const EncodedWindow& w, bool full_last_layer) {
  check(w);
  const auto& d = layout_.dims();
  const auto& L = layout_;
  Workspace<S>& ws = *ws_;
  const int T = static_cast<int>(w.size());
  const int W = d.width;
  const int dh = W / d.heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  ws.t = T;
  ws.first_row = full_last_layer ? 0 : T - 1;
  ws.layers.resize(static_cast<std::size_t>(d.layers));

  auto mat = [&](std::size_t off, int r, int c) { return Eigen::Map<const Mat>(params + off, r, c); };
  auto row = [&](std::size_t off, int n) { return Eigen::Map<const RowVec<S>>(params + off, n); };

  ws.x0.resize(T, W);
  for (int i = 0; i < T; ++i) {
    ws.x0.row(i) = mat(L.emb_info, d.num_infosets, W).row(w.infoset[i]) +
                   mat(L.emb_act, d.num_action_tokens, W).row(w.prev_action[i]) +
                   static_cast<S>(w.prev_reward[i]) * mat(L.w_rd, 2, W).row(0) +
                   static_cast<S>(w.prev_done[i]) * mat(L.w_rd, 2, W).row(1) + row(L.b_in, W) +
                   mat(L.pos, d.max_positions, W).row(i);
  }

  const Mat* x = &ws.x0;
  for (int l = 0; l < d.layers; ++l) {
    auto& lw = ws.layers[static_cast<std::size_t>(l)];
    const auto& o = L.layer[static_cast<std::size_t>(l)];
    const bool last = l == d.layers - 1;
    const int r0 = last ? ws.first_row : 0;
    const int rows = T - r0;
    lw.xin = *x;
    layer_norm<S>(lw.xin, params + o.ln1_g, params + o.ln1_b, W, lw.xhat1, lw.rstd1, lw.y1);
    lw.k = (lw.y1 * mat(o.wk, W, W)).rowwise() + row(o.bk, W);
    lw.v = (lw.y1 * mat(o.wv, W, W)).rowwise() + row(o.bv, W);
    lw.q = (lw.y1.bottomRows(rows) * mat(o.wq, W, W)).rowwise() + row(o.bq, W);
    lw.o.resize(rows, W);
    lw.p.resize(static_cast<std::size_t>(d.heads));
    for (int h = 0; h < d.heads; ++h) {
      Mat& p = lw.p[static_cast<std::size_t>(h)];
      p = (lw.q.middleCols(h * dh, dh) * lw.k.middleCols(h * dh, dh).transpose()) * scale;
      for (int i = 0; i < rows; ++i) {
        const int visible = r0 + i + 1;  // causal mask: keys 0..r0+i
        auto r = p.row(i);
        const S mx = r.head(visible).maxCoeff();
        r.head(visible) = (r.head(visible).array() - mx).exp();
        r.head(visible) /= r.head(visible).sum();
        r.tail(T - visible).setZero();
      }
      lw.o.middleCols(h * dh, dh) = p * lw.v.middleCols(h * dh, dh);
    }
    lw.x1 = lw.xin.bottomRows(rows) + ((lw.o * mat(o.wo, W, W)).rowwise() + row(o.bo, W));
    layer_norm<S>(lw.x1, params + o.ln2_g, params + o.ln2_b, W, lw.xhat2, lw.rstd2, lw.y2);
    lw.hpre = (lw.y2 * mat(o.w1, W, d.mlp)).rowwise() + row(o.b1, d.mlp);
    lw.hact = lw.hpre.unaryExpr([](S v) { return gelu(v); });
    ws.xout = lw.x1 + ((lw.hact * mat(o.w2, d.mlp, W)).rowwise() + row(o.b2, W));
    x = &ws.xout;
  }
  layer_norm<S>(ws.xout, params + L.lnf_g, params + L.lnf_b, W, ws.xhatf, ws.rstdf, ws.z);

  const int rows = T - ws.first_row;
  const Mat logits = (ws.z * mat(L.head_w, W, d.num_actions)).rowwise() + row(L.head_b, d.num_actions);
  ws.probs.resize(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    const auto& legal = legal_[static_cast<std::size_t>(w.infoset[static_cast<std::size_t>(ws.first_row + i)])];
    Vec pr(static_cast<Eigen::Index>(legal.size()));
    for (std::size_t k = 0; k < legal.size(); ++k) pr(static_cast<Eigen::Index>(k)) = logits(i, legal[k]);
    pr = (pr.array() - pr.maxCoeff()).exp();
    pr /= pr.sum();
    ws.probs[static_cast<std::size_t>(i)] = std::move(pr);
  }
}

template <typename S>
std::vector<typename Transformer<S>::Vec> Transformer<S>::probabilities(const S* params,
                                                                        const EncodedWindow& w) {
  forward(params, w, true);
  return ws_->probs;
}

template <typename S>
typename Transformer<S>::Vec Transformer<S>::last_probabilities(const S* params,
                                                                const EncodedWindow& w) {
  forward(params, w, false);
  return ws_->probs.back();
}

template <typename S>
S Transformer<S>::loss(const S* params, const EncodedWindow& w, S* grad, S grad_scale) {
  forward(params, w, true);
  const auto& d = layout_.dims();
  const auto& L = layout_;
  Workspace<S>& ws = *ws_;
  const int T = ws.t;
  const int W = d.width;
  const int dh = W / d.heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  // Targets as positions into the legal lists.
  std::vector<int> tpos(static_cast<std::size_t>(T), -1);
  int n = 0;
  for (int i = 0; i < T; ++i) {
    const int a = w.target[static_cast<std::size_t>(i)];
    if (a < 0) continue;
    const auto& legal = legal_[static_cast<std::size_t>(w.infoset[static_cast<std::size_t>(i)])];
    int pos = -1;
    for (std::size_t k = 0; k < legal.size(); ++k) {
      if (legal[k] == a) pos = static_cast<int>(k);
    }
    if (pos < 0) throw std::invalid_argument("target action illegal at its infoset");
    tpos[static_cast<std::size_t>(i)] = pos;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("window has no targets");
  S loss = 0;
  for (int i = 0; i < T; ++i) {
    if (tpos[static_cast<std::size_t>(i)] >= 0) {
      loss -= std::log(ws.probs[static_cast<std::size_t>(i)](tpos[static_cast<std::size_t>(i)]));
    }
  }
  loss /= static_cast<S>(n);
  if (!grad) return loss;

  auto mat = [&](std::size_t off, int r, int c) { return Eigen::Map<const Mat>(params + off, r, c); };
  auto gmat = [&](std::size_t off, int r, int c) { return Eigen::Map<Mat>(grad + off, r, c); };
  auto grow = [&](std::size_t off, int c) { return Eigen::Map<RowVec<S>>(grad + off, c); };
  const S gs = grad_scale;

  Mat dlogits = Mat::Zero(T, d.num_actions);
  for (int i = 0; i < T; ++i) {
    const int tp = tpos[static_cast<std::size_t>(i)];
    if (tp < 0) continue;
    const auto& legal = legal_[static_cast<std::size_t>(w.infoset[static_cast<std::size_t>(i)])];
    const Vec& pr = ws.probs[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < legal.size(); ++k) {
      dlogits(i, legal[k]) = (pr(static_cast<Eigen::Index>(k)) - (static_cast<int>(k) == tp ? S(1) : S(0))) /
                             static_cast<S>(n);
    }
  }
  gmat(L.head_w, W, d.num_actions) += gs * (ws.z.transpose() * dlogits);
  grow(L.head_b, d.num_actions) += gs * dlogits.colwise().sum();
  Mat dz = dlogits * mat(L.head_w, W, d.num_actions).transpose();
  Mat dx = layer_norm_back<S>(dz, ws.xhatf, ws.rstdf, params + L.lnf_g, grad + L.lnf_g, grad + L.lnf_b, W, gs);

  for (int l = d.layers - 1; l >= 0; --l) {
    auto& lw = ws.layers[static_cast<std::size_t>(l)];
    const auto& o = L.layer[static_cast<std::size_t>(l)];
    // MLP residual branch.
    gmat(o.w2, d.mlp, W) += gs * (lw.hact.transpose() * dx);
    grow(o.b2, W) += gs * dx.colwise().sum();
    Mat dh_act = dx * mat(o.w2, d.mlp, W).transpose();
    for (Eigen::Index i = 0; i < dh_act.rows(); ++i) {
      for (Eigen::Index j = 0; j < dh_act.cols(); ++j) dh_act(i, j) *= gelu_grad(lw.hpre(i, j));
    }
    gmat(o.w1, W, d.mlp) += gs * (lw.y2.transpose() * dh_act);
    grow(o.b1, d.mlp) += gs * dh_act.colwise().sum();
    const Mat dy2 = dh_act * mat(o.w1, W, d.mlp).transpose();
    Mat dx1 = dx + layer_norm_back<S>(dy2, lw.xhat2, lw.rstd2, params + o.ln2_g, grad + o.ln2_g,
                                      grad + o.ln2_b, W, gs);
    // Attention residual branch.
    gmat(o.wo, W, W) += gs * (lw.o.transpose() * dx1);
    grow(o.bo, W) += gs * dx1.colwise().sum();
    const Mat d_o = dx1 * mat(o.wo, W, W).transpose();
    Mat dq(T, W), dk(T, W), dv(T, W);
    for (int h = 0; h < d.heads; ++h) {
      const Mat& p = lw.p[static_cast<std::size_t>(h)];
      const auto doh = d_o.middleCols(h * dh, dh);
      Mat dp = doh * lw.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = p.transpose() * doh;
      const Vec rs = (dp.cwiseProduct(p)).rowwise().sum();
      Mat ds = p.cwiseProduct((dp.colwise() - rs)) * scale;
      dq.middleCols(h * dh, dh) = ds * lw.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * lw.q.middleCols(h * dh, dh);
    }
    gmat(o.wq, W, W) += gs * (lw.y1.transpose() * dq);
    grow(o.bq, W) += gs * dq.colwise().sum();
    gmat(o.wk, W, W) += gs * (lw.y1.transpose() * dk);
    grow(o.bk, W) += gs * dk.colwise().sum();
    gmat(o.wv, W, W) += gs * (lw.y1.transpose() * dv);
    grow(o.bv, W) += gs * dv.colwise().sum();
    const Mat dy1 = dq * mat(o.wq, W, W).transpose() + dk * mat(o.wk, W, W).transpose() +
                    dv * mat(o.wv, W, W).transpose();
    dx = dx1 + layer_norm_back<S>(dy1, lw.xhat1, lw.rstd1, params + o.ln1_g, grad + o.ln1_g,
                                  grad + o.ln1_b, W, gs);
  }

  auto g_info = gmat(L.emb_info, d.num_infosets, W);
  auto g_act = gmat(L.emb_act, d.num_action_tokens, W);
  auto g_rd = gmat(L.w_rd, 2, W);
  auto g_pos = gmat(L.pos, d.max_positions, W);
  for (int i = 0; i < T; ++i) {
    const auto r = dx.row(i);
    g_info.row(w.infoset[static_cast<std::size_t>(i)]) += gs * r;
    g_act.row(w.prev_action[static_cast<std::size_t>(i)]) += gs * r;
    g_rd.row(0) += gs * static_cast<S>(w.prev_reward[static_cast<std::size_t>(i)]) * r;
    g_rd.row(1) += gs * static_cast<S>(w.prev_done[static_cast<std::size_t>(i)]) * r;
    g_pos.row(i) += gs * r;
  }
  grow(L.b_in, W) += gs * dx.colwise().sum();
  return loss;
}

template class Transformer<float>;
template class Transformer<double>;

}  // namespace ice
