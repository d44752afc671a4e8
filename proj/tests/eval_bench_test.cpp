#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ice/eval_bench.hpp"
#include "ice/solvers.hpp"

using namespace ice;
namespace fs = std::filesystem;

namespace {

const GameSpecPtr& kuhn() {
  static const GameSpecPtr spec = GameSpec::parse("kuhn2");
  return spec;
}

const NeProfile& kuhn_ne() {
  static const NeProfile ne = compute_ne(kuhn(), 10000);
  return ne;
}

std::vector<OpponentTask> kuhn_pool() {
  auto pool = gen_learning_opponents(kuhn(), 0, 10, 5);
  for (int i = 0; i < 30; ++i) pool.push_back(gen_random_opponent(kuhn(), 0, 1000 + i));
  return pool;
}

Testbed small_testbed(int n) {
  Testbed tb;
  for (int i = 0; i < n; ++i) {
    auto t = gen_random_opponent(kuhn(), 0, 50 + i);
    tb.tasks.push_back({t, task_best_response_value(t), task_value(t, kuhn_ne().profile.at(0))});
  }
  return tb;
}

MeanSe pooled(const EvalCurve& c) {
  std::vector<double> all;
  for (const auto& r : c.returns) all.insert(all.end(), r.begin(), r.end());
  return mean_se(all);
}

EvalConfig small_config(int budget, int reps) {
  EvalConfig cfg;
  cfg.budget = budget;
  cfg.repetitions = reps;
  cfg.seed = 11;
  cfg.learner.batch_episodes = 8;
  cfg.learner.learning_rate = 0.1;
  return cfg;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(is, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("build_testbeds: sizes, disjointness, NE certification") {
  const auto pool = kuhn_pool();
  CHECK(kuhn_ne().nash_conv < 0.01);
  const auto tbs = build_testbeds(kuhn(), pool, {0}, {}, kuhn_ne(), 3);
  REQUIRE(tbs.size() == 3);
  CHECK(tbs[0].tasks.size() == 30);
  CHECK(tbs[1].tasks.size() == 20);
  CHECK(tbs[2].tasks.size() == 1);
  std::set<std::string> pool_ids, in_ids;
  for (const auto& t : pool) pool_ids.insert(t.task_id);
  for (const auto& t : tbs[0].tasks) {
    CHECK(pool_ids.count(t.task.task_id) == 1);
    in_ids.insert(t.task.task_id);
  }
  CHECK(in_ids.size() == 30);
  for (const auto& t : tbs[1].tasks) {
    CHECK(pool_ids.count(t.task.task_id) == 0);
    validate_task(t.task);
  }
  const auto& ne_task = tbs[2].tasks[0];
  CHECK(ne_task.task.origin.kind == OriginKind::NE);
  CHECK(ne_task.ne_value == doctest::Approx(-1.0 / 18.0).epsilon(0.05));
  for (const auto& tb : tbs) {
    for (const auto& t : tb.tasks) CHECK(t.br_value >= t.ne_value - 1e-12);
  }
  // Reproducible from the seed; a different seed draws a different subset.
  const auto again = build_testbed(TestbedKind::InDistribution, kuhn(), pool, {0}, {}, kuhn_ne(), 3);
  const auto other = build_testbed(TestbedKind::InDistribution, kuhn(), pool, {0}, {}, kuhn_ne(), 4);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < 30; ++i) {
    same = same && again.tasks[i].task.task_id == tbs[0].tasks[i].task.task_id;
    differs = differs || other.tasks[i].task.task_id != tbs[0].tasks[i].task.task_id;
  }
  CHECK(same);
  CHECK(differs);

  const NeProfile weak = compute_ne(kuhn(), 10);
  CHECK(weak.nash_conv >= 0.01);
  CHECK_THROWS_AS(build_testbeds(kuhn(), pool, {0}, {}, weak, 3), std::runtime_error);
  CHECK_THROWS_AS(build_testbeds(kuhn(), {}, {0}, {}, kuhn_ne(), 3), std::invalid_argument);
  CHECK(ne_threshold(*kuhn()) == 0.01);
  CHECK(ne_threshold(*GameSpec::parse("goof2")) == 0.05);
  CHECK(ne_threshold(*GameSpec::parse("kuhn3")) == 0.05);
}

TEST_CASE("BR and NE baselines match their exact values") {
  SUBCASE("Kuhn: BR within 3 SE of the best-response value, NE vs NE near -1/18") {
    const Testbed tb = small_testbed(2);
    const auto curves = run_baseline(BaselineKind::BR, tb, small_config(1000, 5), {});
    REQUIRE(curves.size() == 2);
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const auto ms = pooled(curves[i]);
      CHECK(std::abs(ms.mean - tb.tasks[i].br_value) < 3 * ms.se);
    }
    Testbed ne_tb = build_testbed(TestbedKind::NEOpponent, kuhn(), {tb.tasks[0].task}, {0}, {}, kuhn_ne(), 1);
    BaselineResources res;
    res.ne = &kuhn_ne();
    const auto ne_curve = run_baseline(BaselineKind::NE, ne_tb, small_config(2000, 5), res);
    const auto ms = pooled(ne_curve[0]);
    CHECK(std::abs(ms.mean - ne_tb.tasks[0].ne_value) < 3 * ms.se);
    CHECK_THROWS_AS(run_baseline(BaselineKind::NE, ne_tb, small_config(10, 5), {}), std::invalid_argument);
  }
  SUBCASE("RPS: NE baseline vs always-rock is about 0") {
    const auto spec = GameSpec::parse("rps2");
    StrategyProfile opp(2);
    opp.set(BehaviorStrategy::pure(spec, 1, {{"rps2/1//", kRock}}));
    const OpponentTask rock{spec, 0, opp, {OriginKind::Random, 0, 0}, "rock"};
    const NeProfile ne = compute_ne(spec, 1000);
    Testbed tb;
    tb.tasks.push_back({rock, 1.0, 0.0});
    BaselineResources res;
    res.ne = &ne;
    const auto c = run_baseline(BaselineKind::NE, tb, small_config(1000, 5), res);
    const auto ms = pooled(c[0]);
    CHECK(std::abs(ms.mean) < 3 * ms.se);
    const auto br = run_baseline(BaselineKind::BR, tb, small_config(50, 5), res);
    CHECK(pooled(br[0]).mean == 1.0);
  }
}

TEST_CASE("learning baselines: curve shape, BR upper bound, determinism, workers") {
  const Testbed tb = small_testbed(3);
  EvalConfig cfg = small_config(300, 5);
  const auto ppo = run_baseline(BaselineKind::OnlinePPO, tb, cfg, {});
  for (std::size_t i = 0; i < ppo.size(); ++i) {
    CHECK(ppo[i].budget() == 300);
    CHECK(ppo[i].returns.size() == 5);
    CHECK(ppo[i].agent == "OnlinePPO");
    const auto pts = ppo[i].points();
    for (std::size_t k = 1; k < pts.size(); ++k) CHECK(pts[k].episode == pts[k - 1].episode + 1);
    // BR is an upper bound on any agent's final window.
    std::vector<double> tail;
    for (const auto& r : ppo[i].returns) tail.insert(tail.end(), r.end() - 60, r.end());
    const auto ms = mean_se(tail);
    CHECK(ms.mean <= tb.tasks[i].br_value + 3 * ms.se);
  }
  cfg.workers = 3;
  const auto par = run_baseline(BaselineKind::OnlinePPO, tb, cfg, {});
  for (std::size_t i = 0; i < ppo.size(); ++i) CHECK(par[i].returns == ppo[i].returns);

  // Pretraining on histories against the same opponents gives a head start.
  std::vector<LearningHistory> hs;
  for (const auto& t : tb.tasks) {
    LearnerConfig lc;
    lc.episodes = 1500;
    lc.seed = 5;
    hs.push_back(run_learner(t.task, lc).history);
  }
  BaselineResources res;
  res.pretrained.emplace(0, pretrain_behavior_cloning(kuhn(), 0, hs));
  const auto ptft = run_baseline(BaselineKind::PretrainFinetune, tb, cfg, res);
  double ppo_first = 0.0, ptft_first = 0.0;
  for (std::size_t i = 0; i < ptft.size(); ++i) {
    ppo_first += ppo[i].first_window();
    ptft_first += ptft[i].first_window();
  }
  CHECK(ptft_first > ppo_first);
  CHECK_THROWS_AS(run_baseline(BaselineKind::PretrainFinetune, tb, cfg, {}), std::invalid_argument);
}

TEST_CASE("pretrain_behavior_cloning uses only the final fraction") {
  LearningHistory h;
  h.task_id = "x";
  h.episodes = 10;
  for (int e = 0; e < 10; ++e) {
    // Early episodes bet with a jack, the final two check.
    h.steps.push_back({"kuhn2/0/J/", e < 8 ? kRaise : kCall, e < 8 ? -1.0 : 1.0, true});
  }
  const auto p = pretrain_behavior_cloning(kuhn(), 0, {h}, 0.2);
  const auto tree = GameTree::get(kuhn());
  const VectorXd j = p.probs(tree->infoset_index(0, "kuhn2/0/J/"));
  CHECK(j(0) == doctest::Approx(0.75));  // (2 + 1) / (2 + 2)
  const VectorXd q = p.probs(tree->infoset_index(0, "kuhn2/0/Q/"));
  CHECK(q(0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(pretrain_behavior_cloning(kuhn(), 0, {h}, 0.0), std::invalid_argument);
}

TEST_CASE("run_ice_eval: frozen model, curve lengths, determinism, errors") {
  const auto vocab = TokenVocab::for_game(kuhn());
  const IceModel model = IceModel::init(vocab, {1, 2, 16, 32}, 32, 9);
  const auto before = model.param_hash();
  const Testbed tb = small_testbed(2);
  EvalConfig cfg = small_config(40, 5);
  const auto a = run_ice_eval(model, tb, cfg);
  CHECK(model.param_hash() == before);
  REQUIRE(a.size() == 2);
  for (const auto& c : a) {
    CHECK(c.agent == "ICE");
    CHECK(c.testbed == "in_dist");
    CHECK(c.budget() == 40);
    CHECK(c.points().size() == 40);
  }
  cfg.workers = 4;
  const auto b = run_ice_eval(model, tb, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].returns == b[i].returns);
  cfg.context_length = 8;
  CHECK_NOTHROW(run_ice_eval(model, tb, cfg));
  cfg.context_length = 64;
  CHECK_THROWS_AS(run_ice_eval(model, tb, cfg), std::invalid_argument);
  cfg.context_length = 0;
  const IceModel leduc = IceModel::init(TokenVocab::for_game(GameSpec::parse("leduc2")), {1, 2, 16, 32}, 32, 9);
  CHECK_THROWS_WITH_AS(run_ice_eval(leduc, tb, cfg), doctest::Contains("leduc2"), std::invalid_argument);
  cfg.repetitions = 4;
  CHECK_THROWS_AS(run_ice_eval(model, tb, cfg), std::invalid_argument);
}

TEST_CASE("summarize: CSV shapes, aggregation, flags") {
  auto curve = [](const std::string& agent, const std::string& task, double level) {
    EvalCurve c;
    c.agent = agent;
    c.testbed = "in_dist";
    c.task_id = task;
    for (int r = 0; r < 5; ++r) {
      std::vector<double> xs;
      for (int e = 0; e < 10; ++e) xs.push_back(level + (e % 2 ? 0.5 : -0.5) + 0.01 * r);
      c.returns.push_back(xs);
    }
    return c;
  };
  const std::vector<EvalCurve> curves{curve("ICE", "a", 0.2), curve("ICE", "b", -0.4), curve("NE", "a", 0.0),
                                      curve("NE", "b", 0.0)};
  const auto dir = fs::temp_directory_path() / "ice_summary_test";
  fs::remove_all(dir);
  const Summary s = summarize(curves, "kuhn2", dir.string(), "abc");
  CHECK(count_lines(dir / "curves.csv") == 1 + 4 * 5 * 10);
  CHECK(count_lines(dir / "aggregate.csv") == 1 + 2 * 10);
  REQUIRE(s.agents.size() == 2);
  CHECK(s.agents[0].agent == "ICE");
  CHECK(s.agents[0].final_window == doctest::Approx(-0.1 + 0.02));
  CHECK(s.agents[1].final_window == doctest::Approx(0.02));
  CHECK(s.ice_below_ne == std::vector<std::string>{"b"});
  CHECK(s.report.find("ordering in_dist: NE > ICE") != std::string::npos);
  CHECK(s.report.find("config=abc") != std::string::npos);

  // The aggregate is the unweighted task mean of the per-task curves.
  std::ifstream is(dir / "aggregate.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "agent,game,testbed,episode,mean,stderr");
  std::getline(is, line);
  const auto fields = split(line, ',');
  REQUIRE(fields.size() == 6);
  const double expect = (curves[0].points()[0].mean + curves[1].points()[0].mean) / 2;
  CHECK(std::stod(fields[4]) == doctest::Approx(expect));
  CHECK_THROWS_AS(summarize({}, "kuhn2", dir.string()), std::invalid_argument);
  fs::remove_all(dir);
}
