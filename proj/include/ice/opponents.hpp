#pragma once

// Opponent-strategy dataset: random (uniform-Dirichlet) opponents, CFR
// snapshot opponents, the curriculum ordering, and pool persistence.

#include <cstdint>
#include <string>
#include <vector>

#include "ice/game.hpp"
#include "ice/strategy.hpp"

namespace ice {

enum class OriginKind { Random, LearningSnapshot, NE };

struct Origin {
  OriginKind kind = OriginKind::Random;
  int iteration = 0;       // CFR iteration of a snapshot / NE profile
  std::uint64_t seed = 0;  // source seed of a random opponent
};

std::string origin_name(OriginKind kind);
OriginKind parse_origin(const std::string& name);

// A fixed joint strategy for every non-exploiter seat; one RL task.
struct OpponentTask {
  GameSpecPtr spec;
  int exploiter_seat = 0;
  StrategyProfile opponents;  // exploiter seat left empty
  Origin origin;
  std::string task_id;
};

// Validates seat and that every non-exploiter seat is covered.
void validate_task(const OpponentTask& task);

// Every non-exploiter infoset gets an independent uniform draw from the
// probability simplex. Reproducible from `seed`. Default id:
// "rand-s<seat>-<hex seed>".
OpponentTask gen_random_opponent(const GameSpecPtr& spec, int exploiter_seat,
                                 std::uint64_t seed, std::string task_id = {});

// Runs vanilla CFR once and records the average strategy of all seats after
// iterations 1, 1 + ips, 1 + 2 ips, ... (so snapshot 1 is uniform). Returns,
// per requested seat, `snapshots` tasks in ascending iteration order with ids
// "cfr-s<seat>-k<k>".
std::vector<std::vector<OpponentTask>> gen_learning_opponents(
    const GameSpecPtr& spec, const std::vector<int>& exploiter_seats, int snapshots,
    int iters_per_snapshot);
std::vector<OpponentTask> gen_learning_opponents(const GameSpecPtr& spec, int exploiter_seat,
                                                 int snapshots, int iters_per_snapshot);

// Wraps a (complete) CFR profile as the opponent of `exploiter_seat`.
OpponentTask make_ne_task(const StrategyProfile& profile, int exploiter_seat, int iterations);

struct Curriculum {
  std::vector<std::string> order;
  int gap = 1;
  int num_learning = 0;
  int num_random = 0;
};

// Algorithm 1. Pool emptiness is also checked before each step so that an
// initially empty pool appends the other pool unchanged.
Curriculum generate_curriculum(const std::vector<std::string>& learning,
                               const std::vector<std::string>& random, int gap);

// Pool directory: manifest.txt plus one strategy file per task under
// strategies/<task_id>.strat. Manifest lines (tab separated):
// task_id origin seat iteration seed file
struct PoolManifestEntry {
  std::string task_id;
  Origin origin;
  int seat = 0;
  std::string file;
};

void save_pool(const std::string& dir, const std::vector<OpponentTask>& tasks,
               const std::string& config_hash);
std::vector<OpponentTask> load_pool(const std::string& dir, std::string* config_hash = nullptr);
std::vector<PoolManifestEntry> read_manifest(const std::string& path, std::string* game,
                                             std::string* config_hash);

}  // namespace ice
