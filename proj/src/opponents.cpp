#include "ice/opponents.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ice/game_tree.hpp"
#include "ice/solvers.hpp"

namespace ice {

namespace fs = std::filesystem;

std::string origin_name(OriginKind kind) {
  switch (kind) {
    case OriginKind::Random: return "random";
    case OriginKind::LearningSnapshot: return "learning";
    case OriginKind::NE: return "ne";
  }
  return "?";
}

OriginKind parse_origin(const std::string& name) {
  if (name == "random") return OriginKind::Random;
  if (name == "learning") return OriginKind::LearningSnapshot;
  if (name == "ne") return OriginKind::NE;
  throw std::invalid_argument("unknown task origin: " + name);
}

void validate_task(const OpponentTask& task) {
  if (!task.spec) throw std::invalid_argument("task without game");
  const int n = task.spec->num_players();
  if (task.exploiter_seat < 0 || task.exploiter_seat >= n) {
    throw std::invalid_argument("bad exploiter seat in task " + task.task_id);
  }
  if (task.opponents.num_players() != n) {
    throw std::invalid_argument("opponent profile size mismatch in task " + task.task_id);
  }
  for (int p = 0; p < n; ++p) {
    if (p != task.exploiter_seat && !task.opponents.has(p)) {
      throw std::invalid_argument("task " + task.task_id + " misses seat " + std::to_string(p));
    }
  }
}

OpponentTask gen_random_opponent(const GameSpecPtr& spec, int exploiter_seat, std::uint64_t seed,
                                 std::string task_id) {
  const int n = spec->num_players();
  if (exploiter_seat < 0 || exploiter_seat >= n) throw std::invalid_argument("bad exploiter seat");
  Rng rng(seed);
  StrategyProfile prof(n);
  for (int p = 0; p < n; ++p) {
    if (p == exploiter_seat) continue;
    BehaviorStrategy::Table table;
    for (const auto& info : enumerate_infosets(spec, p)) {
      // Normalized unit exponentials are Dirichlet(1, ..., 1) distributed.
      VectorXd v(static_cast<Eigen::Index>(info.legal.size()));
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = -std::log1p(-uniform01(rng));
      table.emplace(info.key, v / v.sum());
    }
    prof.set(BehaviorStrategy(spec, p, std::move(table)));
  }
  if (task_id.empty()) task_id = "rand-s" + std::to_string(exploiter_seat) + "-" + hex64(seed);
  return {spec, exploiter_seat, std::move(prof), {OriginKind::Random, 0, seed}, std::move(task_id)};
}

std::vector<std::vector<OpponentTask>> gen_learning_opponents(
    const GameSpecPtr& spec, const std::vector<int>& exploiter_seats, int snapshots,
    int iters_per_snapshot) {
  if (snapshots < 1 || iters_per_snapshot < 1) {
    throw std::invalid_argument("snapshots and iters_per_snapshot must be >= 1");
  }
  for (int seat : exploiter_seats) {
    if (seat < 0 || seat >= spec->num_players()) throw std::invalid_argument("bad exploiter seat");
  }
  std::vector<std::vector<OpponentTask>> out(exploiter_seats.size());
  CfrState cfr(spec);
  for (int k = 1; k <= snapshots; ++k) {
    const int target = 1 + (k - 1) * iters_per_snapshot;
    while (cfr.iterations() < target) cfr.iterate();
    const StrategyProfile avg = cfr.average_strategy();
    for (std::size_t s = 0; s < exploiter_seats.size(); ++s) {
      const int seat = exploiter_seats[s];
      StrategyProfile opp(spec->num_players());
      for (int p = 0; p < spec->num_players(); ++p) {
        if (p != seat) opp.set(avg.at(p));
      }
      out[s].push_back({spec, seat, std::move(opp), {OriginKind::LearningSnapshot, target, 0},
                        "cfr-s" + std::to_string(seat) + "-k" + std::to_string(k)});
    }
  }
  return out;
}

std::vector<OpponentTask> gen_learning_opponents(const GameSpecPtr& spec, int exploiter_seat,
                                                 int snapshots, int iters_per_snapshot) {
  return gen_learning_opponents(spec, std::vector<int>{exploiter_seat}, snapshots,
                                iters_per_snapshot)
      .front();
}

OpponentTask make_ne_task(const StrategyProfile& profile, int exploiter_seat, int iterations) {
  if (!profile.complete()) throw std::invalid_argument("NE profile must be complete");
  const auto spec = profile.at(0).spec();
  StrategyProfile opp(spec->num_players());
  for (int p = 0; p < spec->num_players(); ++p) {
    if (p != exploiter_seat) opp.set(profile.at(p));
  }
  OpponentTask task{spec, exploiter_seat, std::move(opp), {OriginKind::NE, iterations, 0},
                    "ne-s" + std::to_string(exploiter_seat)};
  validate_task(task);
  return task;
}

Curriculum generate_curriculum(const std::vector<std::string>& learning,
                               const std::vector<std::string>& random, int gap) {
  if (gap < 1) throw std::invalid_argument("curriculum gap must be >= 1");
  Curriculum c;
  c.gap = gap;
  c.num_learning = static_cast<int>(learning.size());
  c.num_random = static_cast<int>(random.size());
  std::size_t li = 0;
  std::size_t ri = 0;
  auto drain = [&] {
    c.order.insert(c.order.end(), learning.begin() + static_cast<std::ptrdiff_t>(li), learning.end());
    c.order.insert(c.order.end(), random.begin() + static_cast<std::ptrdiff_t>(ri), random.end());
  };
  if (learning.empty() || random.empty()) {
    drain();
    return c;
  }
  const std::size_t total = learning.size() + random.size();
  for (std::size_t i = 1; i <= total; ++i) {
    if (i % static_cast<std::size_t>(gap) == 0) {
      c.order.push_back(random[ri++]);
    } else {
      c.order.push_back(learning[li++]);
    }
    if (ri == random.size() || li == learning.size()) {
      drain();
      break;
    }
  }
  return c;
}

std::vector<PoolManifestEntry> read_manifest(const std::string& path, std::string* game,
                                             std::string* config_hash) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read manifest " + path);
  std::vector<PoolManifestEntry> out;
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
        if (name == "game" && game) *game = field.substr(eq + 1);
        if (name == "config" && config_hash) *config_hash = field.substr(eq + 1);
      }
      continue;
    }
    const auto f = split(line, '\t');
    if (f.size() != 6) throw std::runtime_error("bad manifest line: " + line);
    PoolManifestEntry e;
    e.task_id = f[0];
    e.origin.kind = parse_origin(f[1]);
    e.seat = std::stoi(f[2]);
    e.origin.iteration = std::stoi(f[3]);
    e.origin.seed = std::stoull(f[4], nullptr, 16);
    e.file = f[5];
    out.push_back(std::move(e));
  }
  return out;
}

void save_pool(const std::string& dir, const std::vector<OpponentTask>& tasks,
               const std::string& config_hash) {
  if (tasks.empty()) throw std::invalid_argument("empty opponent pool");
  fs::create_directories(fs::path(dir) / "strategies");
  std::ofstream manifest(fs::path(dir) / "manifest.txt", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
  manifest << "# game=" << tasks.front().spec->name() << " tasks=" << tasks.size()
           << " config=" << config_hash << "\n";
  for (const auto& t : tasks) {
    validate_task(t);
    const std::string file = "strategies/" + t.task_id + ".strat";
    std::vector<BehaviorStrategy> seats;
    for (int p = 0; p < t.spec->num_players(); ++p) {
      if (p != t.exploiter_seat) seats.push_back(t.opponents.at(p));
    }
    save_strategies((fs::path(dir) / file).string(), seats);
    manifest << t.task_id << '\t' << origin_name(t.origin.kind) << '\t' << t.exploiter_seat << '\t'
             << t.origin.iteration << '\t' << hex64(t.origin.seed) << '\t' << file << '\n';
  }
  if (!manifest) throw std::runtime_error("manifest write failed in " + dir);
}

std::vector<OpponentTask> load_pool(const std::string& dir, std::string* config_hash) {
  std::string game;
  const auto entries = read_manifest((fs::path(dir) / "manifest.txt").string(), &game, config_hash);
  const auto spec = GameSpec::parse(game);
  std::vector<OpponentTask> out;
  for (const auto& e : entries) {
    StrategyProfile prof(spec->num_players());
    for (auto& s : load_strategies((fs::path(dir) / e.file).string())) {
      if (s.spec()->name() != spec->name()) throw std::runtime_error("game mismatch in " + e.file);
      prof.set(std::move(s));
    }
    OpponentTask t{spec, e.seat, std::move(prof), e.origin, e.task_id};
    validate_task(t);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace ice
