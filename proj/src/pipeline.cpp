#include "ice/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ice {

namespace fs = std::filesystem;

namespace {

// Hash scopes: each stage's artifacts are stamped with the hash of the keys
// that stage (and its upstream stages) depends on.
enum Scope { kPool = 0, kCollect = 1, kTrain = 2, kEval = 3, kLocal = 4 };

struct Field {
  std::string key;
  Scope scope;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  throw std::invalid_argument("config key '" + key + "': bad value '" + value + "' (" + what + ")");
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "expected an integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const bool hex = v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X');
  const char* first = v.data() + (hex ? 2 : 0);
  const auto [p, ec] = std::from_chars(first, v.data() + v.size(), out, hex ? 16 : 10);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "expected an unsigned integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "expected a number");
  }
  if (used != v.size()) bad_value(key, v, "expected a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "expected true or false");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

#define ICE_INT(name, scope, expr) \
  Field { name, scope, [](const RunConfig& c) { return std::to_string(c.expr); }, \
          [](RunConfig& c, const std::string& v) { c.expr = parse_int(name, v); } }
#define ICE_DBL(name, scope, expr) \
  Field { name, scope, [](const RunConfig& c) { return format_double(c.expr); }, \
          [](RunConfig& c, const std::string& v) { c.expr = parse_double(name, v); } }
#define ICE_STR(name, scope, expr) \
  Field { name, scope, [](const RunConfig& c) { return c.expr; }, \
          [](RunConfig& c, const std::string& v) { c.expr = v; } }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      ICE_STR("game", kPool, game),
      ICE_STR("seats", kPool, seats),
      Field{"seed", kPool, [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
      ICE_INT("pool.learning_opponents", kPool, learning_opponents),
      ICE_INT("pool.random_opponents", kPool, random_opponents),
      ICE_INT("pool.iters_per_snapshot", kPool, iters_per_snapshot),
      ICE_INT("learner.episodes", kCollect, learner.episodes),
      ICE_DBL("learner.learning_rate", kCollect, learner.learning_rate),
      ICE_DBL("learner.clip", kCollect, learner.clip),
      ICE_DBL("learner.discount", kCollect, learner.discount),
      ICE_DBL("learner.entropy_coef", kCollect, learner.entropy_coef),
      ICE_DBL("learner.value_coef", kCollect, learner.value_coef),
      ICE_INT("learner.batch_episodes", kCollect, learner.batch_episodes),
      ICE_INT("learner.epochs", kCollect, learner.epochs),
      ICE_INT("train.gap", kTrain, gap),
      ICE_DBL("train.previous_rate", kTrain, train.previous_rate),
      ICE_INT("train.trains_per_task", kTrain, train.trains_per_task),
      ICE_INT("train.iterations", kTrain, train.iterations),
      ICE_INT("train.context_length", kTrain, train.context_length),
      ICE_INT("train.batch_size", kTrain, train.batch_size),
      ICE_DBL("train.learning_rate", kTrain, train.learning_rate),
      ICE_DBL("train.warmup_fraction", kTrain, train.warmup_fraction),
      ICE_DBL("train.grad_clip", kTrain, train.grad_clip),
      Field{"train.train_first_step", kTrain,
            [](const RunConfig& c) { return std::string(c.train.train_first_step ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.train.train_first_step = parse_bool("train.train_first_step", v); }},
      ICE_INT("train.layers", kTrain, train.arch.layers),
      ICE_INT("train.heads", kTrain, train.arch.heads),
      ICE_INT("train.width", kTrain, train.arch.width),
      ICE_INT("train.mlp", kTrain, train.arch.mlp),
      ICE_INT("eval.budget", kEval, eval_budget),
      ICE_INT("eval.repetitions", kEval, eval_repetitions),
      ICE_INT("eval.in_dist", kEval, eval_in_dist),
      ICE_INT("eval.out_dist", kEval, eval_out_dist),
      ICE_INT("eval.ne_iterations", kEval, eval_ne_iterations),
      ICE_INT("eval.context_length", kEval, eval_context_length),
      ICE_STR("eval.mode", kEval, eval_mode),
      ICE_STR("eval.testbeds", kEval, eval_testbeds),
      ICE_STR("eval.baselines", kEval, eval_baselines),
      ICE_STR("out", kLocal, out),
      ICE_INT("workers", kLocal, workers),
  };
  return f;
}

#undef ICE_INT
#undef ICE_DBL
#undef ICE_STR

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string scope_hash(const RunConfig& c, Scope upto) {
  std::string text;
  for (const auto& f : fields()) {
    if (f.scope <= upto) text += f.key + "=" + f.get(c) + "\n";
  }
  return hex64(fnv1a64(text));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : split(s, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::pair<std::string, std::string> split_assignment(const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + line + "'");
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

}  // namespace

// ------------------------------------------------------------------ config

RunConfig RunConfig::defaults_for(const std::string& game) {
  const auto spec = GameSpec::parse(game);  // throws on unknown games
  RunConfig c;
  c.game = spec->name();
  const bool small = spec->id() == GameId::Kuhn || spec->id() == GameId::RPS;
  c.iters_per_snapshot = small ? 500 : 200;
  c.train.previous_rate = small ? 0.1 : 0.3;
  c.train.trains_per_task = (!small && spec->num_players() == 3) ? 30 : 10;
  c.train.context_length = 1000;
  switch (spec->id()) {
    case GameId::RPS:
    case GameId::Kuhn: c.eval_ne_iterations = 10000; break;
    case GameId::Leduc: c.eval_ne_iterations = spec->num_players() == 2 ? 3000 : 300; break;
    case GameId::Goofspiel: c.eval_ne_iterations = spec->num_players() == 2 ? 1000 : 100; break;
  }
  return c;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, value); }
std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

std::vector<int> RunConfig::exploiter_seats() const {
  const int n = spec()->num_players();
  std::vector<int> out;
  if (seats == "all") {
    for (int p = 0; p < n; ++p) out.push_back(p);
    return out;
  }
  std::set<int> seen;
  for (const auto& s : split_list(seats)) {
    const int p = parse_int("seats", s);
    if (p < 0 || p >= n) bad_value("seats", seats, "seat out of range for " + game);
    if (!seen.insert(p).second) bad_value("seats", seats, "duplicate seat");
    out.push_back(p);
  }
  if (out.empty()) bad_value("seats", seats, "no seats");
  return out;
}

void RunConfig::validate() const {
  const auto sp = spec();
  exploiter_seats();
  if (learning_opponents < 0 || random_opponents < 0 || learning_opponents + random_opponents < 1) {
    throw std::invalid_argument("the opponent pool needs at least one task");
  }
  if (iters_per_snapshot < 1) throw std::invalid_argument("pool.iters_per_snapshot must be >= 1");
  if (gap < 1) throw std::invalid_argument("train.gap must be >= 1");
  learner.validate();
  train.validate();
  if (eval_budget < 1) throw std::invalid_argument("eval.budget must be >= 1");
  if (eval_repetitions < 5) throw std::invalid_argument("eval.repetitions must be >= 5");
  if (eval_in_dist < 0 || eval_out_dist < 0) throw std::invalid_argument("eval testbed sizes must be >= 0");
  if (eval_ne_iterations < 1) throw std::invalid_argument("eval.ne_iterations must be >= 1");
  if (eval_context_length < 0 || eval_context_length > train.context_length) {
    throw std::invalid_argument("eval.context_length must lie in [0, train.context_length]");
  }
  if (eval_mode != "sample" && eval_mode != "greedy") throw std::invalid_argument("eval.mode must be sample or greedy");
  for (const auto& t : split_list(eval_testbeds)) parse_testbed(t);
  for (const auto& b : split_list(eval_baselines)) parse_baseline(b);
  if (out.empty()) throw std::invalid_argument("out must be nonempty");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

std::string RunConfig::canonical() const {
  std::string text;
  for (const auto& f : fields()) {
    if (f.scope <= kTrain) text += f.key + "=" + f.get(*this) + "\n";
  }
  return text;
}

std::string RunConfig::hash() const { return scope_hash(*this, kTrain); }

RunConfig make_run_config(const std::string& text, const std::vector<std::string>& overrides) {
  std::vector<std::pair<std::string, std::string>> assignments;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    assignments.push_back(split_assignment(t));
  }
  for (const auto& o : overrides) assignments.push_back(split_assignment(o));
  // The last game assignment selects the default profile.
  std::string game = "kuhn2";
  for (const auto& [k, v] : assignments) {
    if (k == "game") game = v;
  }
  RunConfig c = RunConfig::defaults_for(game);
  for (const auto& [k, v] : assignments) c.set(k, v);
  c.game = c.spec()->name();
  return c;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return make_run_config(ss.str(), overrides);
}

std::string run_path(const RunConfig& config, const std::string& relative) {
  return (fs::path(config.out) / relative).string();
}

std::string history_path(const RunConfig& config, const std::string& task_id) {
  return run_path(config, "histories/" + task_id + ".hist");
}

// ------------------------------------------------------------------ stages

namespace {

void write_run_cfg(const RunConfig& c) {
  fs::create_directories(c.out);
  std::ofstream os(run_path(c, "run.cfg"), std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + run_path(c, "run.cfg"));
  os << "# run=" << c.hash() << " pool=" << scope_hash(c, kPool) << " collect=" << scope_hash(c, kCollect) << "\n";
  for (const auto& f : fields()) {
    if (f.scope <= kEval) os << f.key << " = " << f.get(c) << "\n";
  }
  if (!os) throw std::runtime_error("write failed: run.cfg");
}

std::vector<OpponentTask> load_checked_pool(const RunConfig& c, bool force, std::ostream& log) {
  const auto dir = run_path(c, "pool");
  if (!fs::exists(fs::path(dir) / "manifest.txt")) {
    throw std::runtime_error("missing opponent pool " + dir + " (run gen-opponents first)");
  }
  std::string hash;
  auto pool = load_pool(dir, &hash);
  if (pool.front().spec->name() != c.game) {
    throw std::runtime_error("pool is for game " + pool.front().spec->name() + ", config game is " + c.game);
  }
  const auto expect = scope_hash(c, kPool);
  if (hash != expect) {
    const std::string msg = "pool was generated with config " + hash + ", current pool config is " + expect;
    if (!force) throw std::runtime_error(msg);
    log << "stage=check warning=\"" << msg << "\" forced=1\n";
  }
  return pool;
}

LearningHistory load_checked_history(const RunConfig& c, const std::string& task_id, bool force,
                                     std::ostream& log) {
  const auto path = history_path(c, task_id);
  if (!fs::exists(path)) throw std::runtime_error("missing history for task " + task_id + " (run collect first)");
  auto h = load_history(path);
  const auto expect = scope_hash(c, kCollect);
  if (h.config_hash != expect) {
    const std::string msg = "history " + task_id + " has config " + h.config_hash + ", expected " + expect;
    if (!force) throw std::runtime_error(msg);
    log << "stage=check warning=\"" << msg << "\" forced=1\n";
  }
  return h;
}

double tail_mean(const std::vector<double>& xs, double fraction) {
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(xs.size())));
  double s = 0.0;
  for (std::size_t i = xs.size() - n; i < xs.size(); ++i) s += xs[i];
  return s / static_cast<double>(n);
}

}  // namespace

void cmd_gen_opponents(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto spec = c.spec();
  const auto seats = c.exploiter_seats();
  std::vector<OpponentTask> tasks;
  if (c.learning_opponents > 0) {
    const auto per_seat = gen_learning_opponents(spec, seats, c.learning_opponents, c.iters_per_snapshot);
    for (int k = 0; k < c.learning_opponents; ++k) {
      for (std::size_t s = 0; s < seats.size(); ++s) tasks.push_back(per_seat[s][static_cast<std::size_t>(k)]);
    }
  }
  for (int i = 0; i < c.random_opponents; ++i) {
    for (int seat : seats) {
      const std::string id = "rand-s" + std::to_string(seat) + "-" + std::to_string(i);
      tasks.push_back(gen_random_opponent(spec, seat, derive_seed(c.seed, "pool/random", id), id));
    }
  }
  write_run_cfg(c);
  const auto hash = scope_hash(c, kPool);
  save_pool(run_path(c, "pool"), tasks, hash);
  for (const auto& t : tasks) {
    log << "stage=gen-opponents task=" << t.task_id << " origin=" << origin_name(t.origin.kind)
        << " seat=" << t.exploiter_seat << "\n";
  }
  log << "stage=gen-opponents tasks=" << tasks.size() << " config=" << hash << "\n";
}

void cmd_collect(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto pool = load_checked_pool(c, false, log);
  write_run_cfg(c);
  fs::create_directories(run_path(c, "histories"));
  const auto hash = scope_hash(c, kCollect);
  std::mutex log_mutex;
  parallel_for(pool.size(), c.workers, [&](std::size_t i) {
    const auto& task = pool[i];
    LearnerConfig lc = c.learner;
    lc.seed = derive_seed(c.seed, "collect", task.task_id);
    auto result = run_learner(task, lc);
    result.history.config_hash = hash;
    save_history(history_path(c, task.task_id), result.history);
    save_strategies(run_path(c, "histories/" + task.task_id + ".policy"), {result.final_policy.to_strategy()});
    std::lock_guard<std::mutex> lock(log_mutex);
    log << "stage=collect task=" << task.task_id << " seed=" << hex64(lc.seed) << " episodes=" << lc.episodes
        << " steps=" << result.history.steps.size()
        << " final_return=" << format_double(tail_mean(result.episode_returns, 0.1)) << "\n";
  });
  log << "stage=collect tasks=" << pool.size() << " config=" << hash << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto pool = load_checked_pool(c, false, log);
  std::vector<std::string> learning, random;
  std::map<std::string, LearningHistory> data;
  for (const auto& t : pool) {
    (t.origin.kind == OriginKind::Random ? random : learning).push_back(t.task_id);
    data.emplace(t.task_id, load_checked_history(c, t.task_id, false, log));
  }
  const Curriculum cur = generate_curriculum(learning, random, c.gap);
  const auto vocab = TokenVocab::for_game(c.spec());
  TrainConfig tc = c.train;
  tc.seed = derive_seed(c.seed, "train");
  const auto hash = c.hash();
  write_run_cfg(c);
  fs::create_directories(run_path(c, "model"));

  {
    std::ofstream os(run_path(c, "model/curriculum.txt"), std::ios::binary);
    if (!os) throw std::runtime_error("cannot write curriculum.txt");
    os << "# config=" << hash << " gap=" << cur.gap << " learning=" << cur.num_learning
       << " random=" << cur.num_random << "\n";
    for (const auto& id : cur.order) os << id << "\n";
  }
  std::ofstream loss_log(run_path(c, "model/loss.log"), std::ios::binary);
  if (!loss_log) throw std::runtime_error("cannot write loss.log");
  loss_log << "# config=" << hash << "\n";
  const std::size_t total = static_cast<std::size_t>(tc.resolved_iterations(static_cast<int>(cur.order.size()))) *
                            static_cast<std::size_t>(tc.trains_per_task);
  const std::size_t every = std::max<std::size_t>(1, total / 20);
  double window = 0.0;
  auto result = train_curriculum(cur, data, vocab, tc, [&](std::size_t step, const ScheduleStep& s, double loss) {
    loss_log << step + 1 << '\t' << s.iteration << '\t' << s.task << '\t' << (s.review ? 1 : 0) << '\t'
             << (s.exhausted ? 1 : 0) << '\t' << format_double(loss) << '\n';
    window += loss;
    if ((step + 1) % every == 0 || step + 1 == total) {
      const auto n = (step + 1) % every == 0 ? every : (step + 1) % every;
      log << "stage=train episode=" << step + 1 << "/" << total << " iteration=" << s.iteration
          << " task=" << s.task << " loss=" << format_double(window / static_cast<double>(n)) << "\n"
          << std::flush;
      window = 0.0;
    }
  });
  loss_log.close();
  if (!loss_log) throw std::runtime_error("write failed: loss.log");
  result.model.config_hash = hash;
  save_checkpoint(run_path(c, "model/checkpoint.bin"), result.model);
  vocab.save(run_path(c, "model/vocab.txt"));
  log << "stage=train episodes=" << result.losses.size() << " param_hash=" << hex64(result.model.param_hash())
      << " config=" << hash << "\n";
}

Summary cmd_eval(const RunConfig& c, const EvalRequest& req, std::ostream& log) {
  c.validate();
  const auto spec = c.spec();
  std::vector<TestbedKind> testbeds = req.testbeds;
  if (testbeds.empty()) {
    for (const auto& t : split_list(c.eval_testbeds)) testbeds.push_back(parse_testbed(t));
  }
  std::vector<BaselineKind> baselines = req.baselines;
  if (!req.baselines_set) {
    for (const auto& b : split_list(c.eval_baselines)) baselines.push_back(parse_baseline(b));
  }
  const int ctx = req.context_length >= 0 ? req.context_length : c.eval_context_length;

  const auto pool = load_checked_pool(c, req.force, log);
  const std::string ckpt = req.checkpoint.empty() ? run_path(c, "model/checkpoint.bin") : req.checkpoint;
  if (!fs::exists(ckpt)) throw std::runtime_error("missing checkpoint " + ckpt + " (run train first)");
  const auto vocab_file = (fs::path(ckpt).parent_path() / "vocab.txt").string();
  if (fs::exists(vocab_file)) {
    const auto saved = TokenVocab::load(vocab_file);
    if (saved.game() != c.game) {
      throw std::runtime_error("checkpoint " + ckpt + " was trained for game " + saved.game() +
                               ", config game is " + c.game);
    }
  }
  IceModel model = load_checkpoint(ckpt, TokenVocab::for_game(spec));
  if (model.config_hash != c.hash()) {
    const std::string msg = "checkpoint has config " + model.config_hash + ", current config is " + c.hash();
    if (!req.force) throw std::runtime_error(msg);
    log << "stage=check warning=\"" << msg << "\" forced=1\n";
  }
  const auto before = model.param_hash();

  const NeProfile ne = compute_ne(spec, c.eval_ne_iterations);
  log << "stage=eval ne_iterations=" << ne.iterations << " ne_nash_conv=" << format_double(ne.nash_conv)
      << " threshold=" << format_double(ne_threshold(*spec)) << "\n";
  const auto seats = c.exploiter_seats();
  const TestbedSizes sizes{c.eval_in_dist, c.eval_out_dist};

  BaselineResources res;
  res.ne = &ne;
  if (std::find(baselines.begin(), baselines.end(), BaselineKind::PretrainFinetune) != baselines.end()) {
    std::vector<LearningHistory> hs;
    for (const auto& t : pool) hs.push_back(load_checked_history(c, t.task_id, req.force, log));
    for (int seat : seats) res.pretrained.emplace(seat, pretrain_behavior_cloning(spec, seat, hs));
  }

  EvalConfig ec;
  ec.budget = c.eval_budget;
  ec.repetitions = c.eval_repetitions;
  ec.context_length = ctx;
  ec.mode = c.eval_mode == "greedy" ? ActMode::Greedy : ActMode::Sample;
  ec.workers = c.workers;
  ec.seed = derive_seed(c.seed, "eval");
  ec.learner = c.learner;

  std::vector<EvalCurve> curves;
  for (auto kind : testbeds) {
    const Testbed tb = build_testbed(kind, spec, pool, seats, sizes, ne, derive_seed(c.seed, "testbeds"));
    log << "stage=eval testbed=" << testbed_name(kind) << " tasks=" << tb.tasks.size() << "\n" << std::flush;
    auto add = [&](std::vector<EvalCurve> cs) {
      double fw = 0.0;
      for (const auto& cv : cs) fw += cv.final_window() / static_cast<double>(cs.size());
      log << "stage=eval testbed=" << testbed_name(kind) << " agent=" << (cs.empty() ? "" : cs.front().agent)
          << " final_window=" << format_double(fw) << "\n" << std::flush;
      for (auto& cv : cs) curves.push_back(std::move(cv));
    };
    add(run_ice_eval(model, tb, ec));
    for (auto b : baselines) add(run_baseline(b, tb, ec, res));
  }
  if (model.param_hash() != before) throw std::logic_error("model parameters changed during evaluation");
  const std::vector<std::string> notes{
      "ne_iterations=" + std::to_string(ne.iterations) + " ne_nash_conv=" + format_double(ne.nash_conv),
      "budget=" + std::to_string(ec.budget) + " repetitions=" + std::to_string(ec.repetitions) +
          " context_length=" + std::to_string(ctx > 0 ? ctx : model.context_length()) + " mode=" + c.eval_mode,
      "param_hash=" + hex64(before)};
  auto summary = summarize(curves, c.game, run_path(c, "eval"), c.hash(), notes);
  log << summary.report;
  return summary;
}

std::string cmd_report(const RunConfig& c, std::ostream& log) {
  const auto dir = run_path(c, "eval");
  std::string game;
  const auto curves = read_curves_csv((fs::path(dir) / "curves.csv").string(), &game);
  if (curves.empty()) throw std::runtime_error("no curves in " + dir);
  std::vector<std::string> notes;
  std::string hash;
  {
    std::ifstream is(fs::path(dir) / "report.txt");
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
      if (line.rfind("# ", 0) != 0) break;
      if (first) {
        const auto pos = line.find("config=");
        if (pos != std::string::npos) hash = line.substr(pos + 7);
      } else {
        notes.push_back(line.substr(2));
      }
      first = false;
    }
  }
  const auto summary = summarize(curves, game, dir, hash, notes);
  log << summary.report;
  return summary.report;
}

}  // namespace ice
