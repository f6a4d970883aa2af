#pragma once

#include <cstdint>
#include <vector>

#include "bosh/attackers.hpp"
#include "bosh/tpe.hpp"

namespace bosh {

enum class ResampleRule { matched_to_cut, fixed };

// Meta-loop controls. Stage length m0 is in attacker steps; budgets are in
// queries. total_query_budget 0 means k * per_direction_query_budget.
struct BoshConfig {
    int k = 30;
    int m0 = 3500;
    double cut_frac = 0.5;
    double interval_ratio = 1.4;
    ResampleRule resample_rule = ResampleRule::matched_to_cut;
    int resample_fixed = 0;   // T when resample_rule is fixed
    int resample_cap = 3;
    bool resample_precut_count = false;  // count |pool|*s before the cut instead of after
    std::uint64_t per_direction_query_budget = 40000;
    std::uint64_t total_query_budget = 0;
    std::uint64_t seed = 0;
    InitMode init_mode = InitMode::gaussian;
    int init_retry_cap = 50;
    TpeConfig tpe;
};

struct PoolSlot {
    Configuration cfg;
    AttackerConfig ac;
    std::uint64_t queries_spent = 0;
};

using Pool = std::vector<PoolSlot>;

struct StageStat {
    int stage_index = 0;
    int steps = 0;        // M for this stage
    int pool_size = 0;    // pool size while stepping
    double best_lambda = 0.0;
    std::uint64_t queries_at_end = 0;
};

struct BoshResult {
    Configuration best;
    std::uint64_t total_queries = 0;
    std::vector<StageStat> stage_log;
    Trace trace;
    Archive archive;  // every evaluated (direction, distortion), append-only
    std::vector<Origin> origin_by_config;  // indexed by config_id
};

// Sub-stream seeds shared by the meta-loop and the plain single-run driver,
// so a k = 1 pool replays a plain attack bit for bit.
inline std::uint64_t init_stream_seed(std::uint64_t master) {
    return mix_seed(master, 0x696e6974ULL);
}
inline std::uint64_t tpe_stream_seed(std::uint64_t master) {
    return mix_seed(master, 0x747065ULL);
}
inline std::uint64_t attacker_stream_seed(std::uint64_t master, int config_id) {
    return mix_seed(master, 0x61746b00000000ULL + static_cast<std::uint64_t>(config_id));
}

// Drops the floor(cut_frac * |pool|) worst slots by lambda (ties drop the
// later config_id first). The pool minimum always survives.
void cut_pool(Pool& pool, double cut_frac);

// floor with a relative guard so exact products like 10 * 0.3 do not round down.
std::size_t cut_count(std::size_t pool_size, double cut_frac);

// k independent starts; archive seeded with their initial evaluations.
// config ids 0..k-1. When a sink is given, each start appends one birth
// record so every configuration owns at least one trace point.
std::pair<Pool, Archive> init_pool(int k, const BoshConfig& bc, const AttackerConfig& ac_template,
                                   AttackEnv& env, std::mt19937_64& rng, Trace* sink = nullptr);

// Successive-halving meta-loop over a pool of trajectories with density-model
// resampling between stages. Verifies label(x0) == y0 up front (one query).
BoshResult run_bosh(const BoshConfig& bc, const AttackerConfig& ac_template, AttackEnv& env);

// One trajectory, stepped until its query budget is spent. Same seeding
// discipline as run_bosh's slot 0.
BoshResult run_single_attack(const AttackerConfig& ac_template, std::uint64_t seed,
                             std::uint64_t query_budget, InitMode init_mode, AttackEnv& env,
                             int init_retry_cap = 50);

}  // namespace bosh
