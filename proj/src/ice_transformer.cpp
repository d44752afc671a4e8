#include "ice/ice_transformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ice {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

// --------------------------------------------------------------- vocabulary

TokenVocab TokenVocab::for_game(const GameSpecPtr& spec) {
  TokenVocab v;
  v.game_ = spec->name();
  v.num_actions_ = spec->num_actions();
  for (int p = 0; p < spec->num_players(); ++p) {
    for (const auto& info : enumerate_infosets(spec, p)) {
      v.keys_.push_back(info.key);
      v.legal_.push_back(info.legal);
    }
  }
  v.index();
  return v;
}

void TokenVocab::index() {
  ids_.clear();
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (!ids_.emplace(keys_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary key " + keys_[i]);
    }
  }
}

int TokenVocab::infoset_id(const InfoSetKey& key) const {
  const auto it = ids_.find(key);
  if (it == ids_.end()) throw VocabMiss("infoset not in vocabulary: " + key);
  return it->second;
}

std::uint64_t TokenVocab::hash() const {
  std::uint64_t h = fnv1a64(game_);
  h = fnv1a64("|" + std::to_string(num_actions_) + "|", h);
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    h = fnv1a64(keys_[i], h);
    for (int a : legal_[i]) h = fnv1a64("," + std::to_string(a), h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void TokenVocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# game=" << game_ << " actions=" << num_actions_ << " infosets=" << keys_.size()
     << " hash=" << hex64(hash()) << "\n";
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    os << i << '\t' << keys_[i] << '\t';
    for (std::size_t k = 0; k < legal_[i].size(); ++k) os << (k ? "," : "") << legal_[i][k];
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

TokenVocab TokenVocab::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  TokenVocab v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string field;
      while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto name = field.substr(0, eq);
        if (name == "game") v.game_ = field.substr(eq + 1);
        if (name == "actions") v.num_actions_ = std::stoi(field.substr(eq + 1));
      }
      continue;
    }
    const auto f = split(line, '\t');
    if (f.size() != 3 || std::stoul(f[0]) != v.keys_.size()) {
      throw std::runtime_error("bad vocabulary line: " + line);
    }
    v.keys_.push_back(f[1]);
    std::vector<int> legal;
    for (const auto& a : split(f[2], ',')) legal.push_back(std::stoi(a));
    v.legal_.push_back(std::move(legal));
  }
  if (v.game_.empty() || v.num_actions_ < 1) throw std::runtime_error("vocabulary without header");
  v.index();
  return v;
}

// -------------------------------------------------------------------- model

const ParamLayout& IceModel::layout() const {
  if (!layout_ || !(layout_->dims() == dims)) layout_ = std::make_shared<ParamLayout>(dims);
  return *layout_;
}

IceModel IceModel::init(const TokenVocab& vocab, const Architecture& arch, int context_length,
                        std::uint64_t seed) {
  IceModel m;
  m.vocab = vocab;
  m.dims.layers = arch.layers;
  m.dims.heads = arch.heads;
  m.dims.width = arch.width;
  m.dims.mlp = arch.mlp;
  m.dims.max_positions = context_length;
  m.dims.num_infosets = vocab.num_infosets();
  m.dims.num_actions = vocab.num_actions();
  m.dims.num_action_tokens = vocab.num_action_tokens();
  const ParamLayout& layout = m.layout();
  m.params.assign(layout.size(), 0.0f);
  Rng rng(seed);
  // Box-Muller on the pipeline's own uniform source keeps initialization
  // identical across standard-library implementations.
  auto normal = [&rng]() {
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  };
  const double resid = 0.02 / std::sqrt(2.0 * arch.layers);
  for (const auto& t : layout.tensors()) {
    const auto& n = t.name;
    auto ends = [&n](const char* s) { return n.size() >= std::strlen(s) && n.compare(n.size() - std::strlen(s), std::string::npos, s) == 0; };
    float* p = m.params.data() + t.offset;
    if (ends("_g")) {
      std::fill(p, p + t.size(), 1.0f);
    } else if (t.rows == 1 || n == "head_w") {
      // zero: biases, LayerNorm shifts, action head
    } else {
      const double sd = (ends(".wo") || ends(".w2")) ? resid : 0.02;
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = static_cast<float>(sd * normal());
    }
  }
  return m;
}

std::uint64_t IceModel::param_hash() const {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(params.data()),
                                  params.size() * sizeof(float)));
}

// ----------------------------------------------------------------- encoding

namespace {

void push_position(EncodedWindow& w, const TokenVocab& vocab, const InfoSetKey& key,
                   const StepRecord* prev, int target) {
  const int id = vocab.infoset_id(key);
  if (target >= 0) {
    const auto& legal = vocab.legal()[static_cast<std::size_t>(id)];
    if (std::find(legal.begin(), legal.end(), target) == legal.end()) {
      throw std::invalid_argument("recorded action illegal at " + key);
    }
  }
  w.infoset.push_back(id);
  w.prev_action.push_back(prev ? TokenVocab::action_token(prev->action) : TokenVocab::kBeginToken);
  w.prev_reward.push_back(prev ? prev->reward : 0.0);
  w.prev_done.push_back(prev && prev->done ? 1.0 : 0.0);
  w.target.push_back(target);
}

}  // namespace

EncodedWindow encode_window(std::span<const StepRecord> slice, const StepRecord* previous,
                            const TokenVocab& vocab, int context_length) {
  if (static_cast<int>(slice.size()) > context_length) {
    throw std::invalid_argument("slice longer than the context length; trim to the most recent window");
  }
  EncodedWindow w;
  const StepRecord* prev = previous;
  for (const auto& s : slice) {
    push_position(w, vocab, s.infoset, prev, s.action);
    prev = &s;
  }
  return w;
}

EncodedWindow encode_context(std::span<const StepRecord> context, const InfoSetKey& query,
                             const TokenVocab& vocab, int context_length) {
  if (context_length < 1) throw std::invalid_argument("context length must be >= 1");
  const std::size_t keep = std::min(context.size(), static_cast<std::size_t>(context_length - 1));
  const std::size_t start = context.size() - keep;
  EncodedWindow w = encode_window(context.subspan(start), start > 0 ? &context[start - 1] : nullptr,
                                  vocab, context_length);
  push_position(w, vocab, query, context.empty() ? nullptr : &context.back(), -1);
  return w;
}

std::vector<DecodedStep> decode_window(const EncodedWindow& w, const TokenVocab& vocab) {
  std::vector<DecodedStep> out;
  for (std::size_t i = 0; i < w.size(); ++i) out.push_back({vocab.infoset_key(w.infoset[i]), w.target[i]});
  return out;
}

// ------------------------------------------------------------ forward / loss

VectorXd forward(const IceModel& model, const EncodedWindow& w, int position) {
  if (position < 0 || position >= static_cast<int>(w.size())) throw std::out_of_range("bad query position");
  Transformer<float> tf(model.layout(), model.vocab.legal());
  EncodedWindow prefix = w;
  const auto cut = static_cast<std::size_t>(position + 1);
  prefix.infoset.resize(cut);
  prefix.prev_action.resize(cut);
  prefix.prev_reward.resize(cut);
  prefix.prev_done.resize(cut);
  prefix.target.resize(cut);
  return tf.last_probabilities(model.params.data(), prefix).cast<double>();
}

LossAndGrad nll_loss(const IceModel& model, const std::vector<EncodedWindow>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Transformer<float> tf(model.layout(), model.vocab.legal());
  LossAndGrad out;
  out.grad.assign(model.params.size(), 0.0f);
  const float scale = 1.0f / static_cast<float>(batch.size());
  for (const auto& w : batch) out.loss += tf.loss(model.params.data(), w, out.grad.data(), scale);
  out.loss /= static_cast<double>(batch.size());
  return out;
}

// ------------------------------------------------------------------- acting

IceActor::IceActor(const IceModel& model, int context_length)
    : model_(model), context_length_(context_length), tf_(model.layout(), model.vocab.legal()) {
  if (context_length < 1 || context_length > model.context_length()) {
    throw std::invalid_argument("context length must lie in [1, trained context length]");
  }
}

VectorXd IceActor::probs(std::span<const StepRecord> context, const InfoSetKey& infoset) {
  const EncodedWindow w = encode_context(context, infoset, model_.vocab, context_length_);
  return tf_.last_probabilities(model_.params.data(), w).cast<double>();
}

int IceActor::act(std::span<const StepRecord> context, const InfoSetKey& infoset, ActMode mode,
                  Rng& rng) {
  const VectorXd p = probs(context, infoset);
  const auto& legal = model_.vocab.legal()[static_cast<std::size_t>(model_.vocab.infoset_id(infoset))];
  int pos = 0;
  if (mode == ActMode::Greedy) {
    for (Eigen::Index k = 1; k < p.size(); ++k) {
      if (p(k) > p(pos)) pos = static_cast<int>(k);
    }
  } else {
    pos = sample_index(p, rng);
  }
  return legal[static_cast<std::size_t>(pos)];
}

int act(const IceModel& model, std::span<const StepRecord> context, const InfoSetKey& infoset,
        ActMode mode, Rng& rng) {
  IceActor actor(model, model.context_length());
  return actor.act(context, infoset, mode, rng);
}

// ------------------------------------------------------------------ training

void TrainConfig::validate() const {
  if (!(previous_rate >= 0.0 && previous_rate <= 1.0)) throw std::invalid_argument("previous_rate must lie in [0, 1]");
  if (trains_per_task < 1) throw std::invalid_argument("trains_per_task (M) must be >= 1");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0 (0 = auto)");
  if (context_length < 2) throw std::invalid_argument("context_length must be >= 2");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw std::invalid_argument("warmup_fraction must lie in [0, 1)");
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be >= 0");
}

std::vector<ScheduleStep> curriculum_schedule(const std::vector<std::string>& order,
                                              double previous_rate, int trains_per_task,
                                              int iterations, std::uint64_t seed) {
  if (order.empty()) throw std::invalid_argument("empty curriculum");
  const std::size_t n = order.size();
  Rng rng(seed);
  std::vector<std::string> trained;  // D
  std::vector<ScheduleStep> out;
  for (int t = 1; t <= iterations; ++t) {
    for (int p = 1; p <= trains_per_task; ++p) {
      ScheduleStep s;
      s.iteration = t;
      s.episode = p;
      if (trained.size() < n) {
        const double u = uniform01(rng);
        if (u > previous_rate || trained.empty()) {
          s.task = order[static_cast<std::size_t>(t - 1)];
        } else {
          s.review = true;
          s.task = trained[static_cast<std::size_t>(rng() % trained.size())];
        }
      } else {
        s.exhausted = true;
        s.task = trained[static_cast<std::size_t>(rng() % trained.size())];
      }
      out.push_back(std::move(s));
    }
    if (trained.size() < n) trained.push_back(order[static_cast<std::size_t>(t - 1)]);
  }
  return out;
}

EncodedWindow sample_window(const LearningHistory& history, const TokenVocab& vocab,
                            int context_length, bool train_first_step, Rng& rng) {
  const auto& steps = history.steps;
  if (steps.empty()) throw std::invalid_argument("empty history " + history.task_id);
  while (true) {
    const auto end = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(steps.size()));
    const std::size_t start = end + 1 > static_cast<std::size_t>(context_length)
                                  ? end + 1 - static_cast<std::size_t>(context_length)
                                  : 0;
    const std::span<const StepRecord> all(steps);
    EncodedWindow w = encode_window(all.subspan(start, end - start + 1),
                                    start > 0 ? &steps[start - 1] : nullptr, vocab, context_length);
    if (!train_first_step && start == 0) {
      w.target[0] = -1;
      if (w.size() == 1) continue;
    }
    return w;
  }
}

TrainResult train_curriculum(const Curriculum& curriculum,
                             const std::map<std::string, LearningHistory>& datasets,
                             const TokenVocab& vocab, const TrainConfig& config,
                             const TrainProgress& progress) {
  config.validate();
  for (const auto& id : curriculum.order) {
    if (!datasets.count(id)) throw std::invalid_argument("missing dataset for task " + id);
  }
  const int n = static_cast<int>(curriculum.order.size());
  const int iterations = config.resolved_iterations(n);
  TrainResult out;
  out.schedule = curriculum_schedule(curriculum.order, config.previous_rate, config.trains_per_task,
                                     iterations, derive_seed(config.seed, "schedule"));
  out.model = IceModel::init(vocab, config.arch, config.context_length, derive_seed(config.seed, "init"));
  IceModel& model = out.model;

  Transformer<float> tf(model.layout(), vocab.legal());
  const std::size_t np = model.params.size();
  AlignedVector<float> grad(np), m1(np, 0.0f), m2(np, 0.0f);
  Rng rng(derive_seed(config.seed, "windows"));
  const std::size_t total = out.schedule.size();
  const double warmup = std::max(1.0, std::round(config.warmup_fraction * static_cast<double>(total)));
  const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  const float inv_b = 1.0f / static_cast<float>(config.batch_size);

  for (std::size_t step = 0; step < total; ++step) {
    const ScheduleStep& s = out.schedule[step];
    const LearningHistory& hist = datasets.at(s.task);
    std::fill(grad.begin(), grad.end(), 0.0f);
    double loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const EncodedWindow w = sample_window(hist, vocab, config.context_length, config.train_first_step, rng);
      loss += tf.loss(model.params.data(), w, grad.data(), inv_b);
    }
    loss /= config.batch_size;
    if (!std::isfinite(loss)) {
      throw std::runtime_error("non-finite loss at training episode " + std::to_string(step + 1) +
                               " (task " + s.task + ")");
    }
    double norm2 = 0.0;
    for (float g : grad) norm2 += static_cast<double>(g) * g;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) throw std::runtime_error("non-finite gradient at episode " + std::to_string(step + 1));
    const float clip = (config.grad_clip > 0.0 && norm > config.grad_clip)
                           ? static_cast<float>(config.grad_clip / norm)
                           : 1.0f;
    const double lr = config.learning_rate * std::min(1.0, static_cast<double>(step + 1) / warmup);
    const double t = static_cast<double>(step + 1);
    const float c1 = static_cast<float>(1.0 - std::pow(0.9, t));
    const float c2 = static_cast<float>(1.0 - std::pow(0.999, t));
    const float lrf = static_cast<float>(lr);
    for (std::size_t i = 0; i < np; ++i) {
      const float g = grad[i] * clip;
      m1[i] = b1 * m1[i] + (1.0f - b1) * g;
      m2[i] = b2 * m2[i] + (1.0f - b2) * g * g;
      model.params[i] -= lrf * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
    }
    out.losses.push_back(loss);
    if (progress) progress(step, s, loss);
  }
  for (float p : model.params) {
    if (!std::isfinite(p)) throw std::runtime_error("non-finite parameter after training");
  }
  return out;
}

// --------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'I', 'C', 'E', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n > (1u << 20)) throw std::runtime_error("corrupt checkpoint string");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const IceModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  const ModelDims& d = model.dims;
  for (int v : {d.layers, d.heads, d.width, d.mlp, d.max_positions, d.num_infosets,
                d.num_action_tokens, d.num_actions}) {
    put<std::int32_t>(os, v);
  }
  put<std::uint32_t>(os, 0);  // dtype f32
  put<std::uint64_t>(os, model.vocab.hash());
  put_string(os, model.config_hash);
  const auto& tensors = model.layout().tensors();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_string(os, t.name);
    put<std::int32_t>(os, t.rows);
    put<std::int32_t>(os, t.cols);
    os.write(reinterpret_cast<const char*>(model.params.data() + t.offset),
             static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

IceModel load_checkpoint(const std::string& path, const TokenVocab& vocab) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not an ICE checkpoint: " + path);
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  IceModel m;
  ModelDims& d = m.dims;
  d.layers = get<std::int32_t>(is);
  d.heads = get<std::int32_t>(is);
  d.width = get<std::int32_t>(is);
  d.mlp = get<std::int32_t>(is);
  d.max_positions = get<std::int32_t>(is);
  d.num_infosets = get<std::int32_t>(is);
  d.num_action_tokens = get<std::int32_t>(is);
  d.num_actions = get<std::int32_t>(is);
  if (get<std::uint32_t>(is) != 0) throw std::runtime_error("unsupported checkpoint dtype");
  const auto vocab_hash = get<std::uint64_t>(is);
  if (vocab_hash != vocab.hash()) {
    throw std::runtime_error("checkpoint vocabulary (" + hex64(vocab_hash) + ") does not match game " +
                             vocab.game() + " vocabulary (" + hex64(vocab.hash()) + ")");
  }
  m.vocab = vocab;
  m.config_hash = get_string(is);
  const ParamLayout& layout = m.layout();
  m.params.assign(layout.size(), 0.0f);
  const auto count = get<std::uint32_t>(is);
  if (count != layout.tensors().size()) throw std::runtime_error("checkpoint tensor count mismatch");
  for (const auto& t : layout.tensors()) {
    if (get_string(is) != t.name) throw std::runtime_error("checkpoint tensor order mismatch at " + t.name);
    if (get<std::int32_t>(is) != t.rows || get<std::int32_t>(is) != t.cols) {
      throw std::runtime_error("checkpoint shape mismatch at " + t.name);
    }
    is.read(reinterpret_cast<char*>(m.params.data() + t.offset), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!is) throw std::runtime_error("truncated checkpoint");
  }
  return m;
}

}  // namespace ice
