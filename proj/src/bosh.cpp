#include "bosh/bosh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bosh {

namespace {

void check_bosh_config(const BoshConfig& bc) {
    if (bc.k < 1) throw std::invalid_argument("k must be positive");
    if (bc.m0 < 1) throw std::invalid_argument("m0 must be positive");
    if (!(bc.cut_frac > 0.0) || !(bc.cut_frac < 1.0))
        throw std::invalid_argument("cut_frac must lie in (0, 1)");
    if (!(bc.interval_ratio >= 1.0))
        throw std::invalid_argument("interval_ratio must be at least 1");
    if (bc.resample_rule == ResampleRule::fixed && bc.resample_fixed < 0)
        throw std::invalid_argument("fixed resample count must be non-negative");
    if (bc.resample_cap < 0) throw std::invalid_argument("resample_cap must be non-negative");
    if (bc.per_direction_query_budget == 0)
        throw std::invalid_argument("per-direction query budget must be positive");
}

void verify_clean_origin(AttackEnv& env) {
    if (predict(*env.model, env.x0, *env.ledger) != env.y0)
        throw std::invalid_argument("x0 must carry the clean label y0");
}

bool frozen(const PoolSlot& slot, const BoshConfig& bc) {
    return slot.queries_spent >= bc.per_direction_query_budget;
}

struct BestTracker {
    Configuration best;
    bool has = false;
    void offer(const Configuration& cfg) {
        if (!has || cfg.lambda < best.lambda) {
            best = cfg;
            has = true;
        }
    }
};

}  // namespace

std::size_t cut_count(std::size_t pool_size, double cut_frac) {
    double raw = cut_frac * static_cast<double>(pool_size);
    auto cut = static_cast<std::size_t>(std::floor(raw + 1e-9 * std::max(1.0, raw)));
    return std::min(cut, pool_size > 0 ? pool_size - 1 : 0);
}

void cut_pool(Pool& pool, double cut_frac) {
    if (!(cut_frac > 0.0) || !(cut_frac < 1.0))
        throw std::invalid_argument("cut_frac must lie in (0, 1)");
    std::size_t cut = cut_count(pool.size(), cut_frac);
    if (cut == 0) return;
    // Victims: largest lambda first, later config_id first among equals.
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pool[a].cfg.lambda != pool[b].cfg.lambda)
            return pool[a].cfg.lambda > pool[b].cfg.lambda;
        return pool[a].cfg.config_id > pool[b].cfg.config_id;
    });
    std::vector<bool> drop(pool.size(), false);
    for (std::size_t r = 0; r < cut; ++r) drop[order[r]] = true;
    Pool kept;
    kept.reserve(pool.size() - cut);
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (!drop[i]) kept.push_back(std::move(pool[i]));
    pool = std::move(kept);
}

std::pair<Pool, Archive> init_pool(int k, const BoshConfig& bc, const AttackerConfig& ac_template,
                                   AttackEnv& env, std::mt19937_64& rng, Trace* sink) {
    if (k < 1) throw std::invalid_argument("k must be positive");
    Pool pool;
    Archive archive;
    pool.reserve(static_cast<std::size_t>(k));
    int d = env.model->dim();
    for (int i = 0; i < k; ++i) {
        std::uint64_t before = env.ledger->count;
        Configuration cfg = sample_initial_direction(rng, d, bc.init_mode, env, bc.init_retry_cap);
        cfg.config_id = i;
        archive.push_back(ArchiveEntry{cfg.u, cfg.lambda});
        if (sink) sink->push_back(TraceRecord{env.ledger->count, cfg.lambda, i, 0});
        PoolSlot slot;
        slot.cfg = std::move(cfg);
        slot.ac = ac_template;
        slot.ac.rng.seed(attacker_stream_seed(bc.seed, i));
        slot.queries_spent = env.ledger->count - before;
        pool.push_back(std::move(slot));
    }
    return {std::move(pool), std::move(archive)};
}

BoshResult run_bosh(const BoshConfig& bc, const AttackerConfig& ac_template, AttackEnv& env) {
    check_bosh_config(bc);
    std::uint64_t start = env.ledger->count;
    std::uint64_t total_budget = bc.total_query_budget > 0
                                     ? bc.total_query_budget
                                     : bc.per_direction_query_budget * static_cast<std::uint64_t>(bc.k);
    auto spent = [&] { return env.ledger->count - start; };

    verify_clean_origin(env);

    std::mt19937_64 init_rng(init_stream_seed(bc.seed));
    std::mt19937_64 tpe_rng(tpe_stream_seed(bc.seed));
    BoshResult result;
    auto [pool, archive] = init_pool(bc.k, bc, ac_template, env, init_rng, &result.trace);
    result.origin_by_config.assign(static_cast<std::size_t>(bc.k), Origin::initial);
    BestTracker best;
    for (const PoolSlot& slot : pool) best.offer(slot.cfg);

    int next_config_id = bc.k;
    int steps = bc.m0;
    for (int stage = 0;; ++stage) {
        // Stage: advance every unfrozen slot, recording each intermediate
        // direction in the archive. Budgets are checked between steps.
        bool out_of_budget = spent() >= total_budget;
        for (PoolSlot& slot : pool) {
            if (out_of_budget || frozen(slot, bc)) continue;
            auto per_step = [&](const Configuration& cur) {
                archive.push_back(ArchiveEntry{cur.u, cur.lambda});
                best.offer(cur);
                return true;
            };
            int taken = 0;
            while (taken < steps && !frozen(slot, bc) && !out_of_budget) {
                std::uint64_t before = env.ledger->count;
                slot.cfg = run_steps(slot.cfg, slot.ac, 1, env, &result.trace, stage, per_step);
                slot.queries_spent += env.ledger->count - before;
                ++taken;
                out_of_budget = spent() >= total_budget;
            }
        }
        result.stage_log.push_back(StageStat{stage, steps, static_cast<int>(pool.size()),
                                             best.best.lambda, env.ledger->count});

        if (out_of_budget) break;
        if (pool.size() == 1 && frozen(pool.front(), bc)) break;
        bool all_frozen = true;
        for (const PoolSlot& slot : pool) all_frozen = all_frozen && frozen(slot, bc);

        std::size_t precut_size = pool.size();
        cut_pool(pool, bc.cut_frac);
        int want = bc.resample_rule == ResampleRule::fixed
                       ? bc.resample_fixed
                       : static_cast<int>(cut_count(
                             bc.resample_precut_count ? precut_size : pool.size(), bc.cut_frac));
        want = std::min(want, bc.resample_cap);

        if (want > 0 && archive.size() >= 2) {
            ResampleOutcome fresh =
                tpe_resample(archive, want, bc.tpe, tpe_rng, env, next_config_id);
            for (Configuration& cfg : fresh.configs) {
                archive.push_back(ArchiveEntry{cfg.u, cfg.lambda});
                best.offer(cfg);
                result.origin_by_config.push_back(Origin::resampled);
                result.trace.push_back(
                    TraceRecord{env.ledger->count, cfg.lambda, cfg.config_id, stage + 1});
                PoolSlot slot;
                slot.ac = ac_template;
                slot.ac.rng.seed(attacker_stream_seed(bc.seed, cfg.config_id));
                slot.cfg = std::move(cfg);
                slot.queries_spent = 0;
                pool.push_back(std::move(slot));
                ++next_config_id;
            }
        } else if (all_frozen) {
            break;  // nothing can move and nothing new arrived
        }

        steps = std::max(1, static_cast<int>(std::llround(steps * bc.interval_ratio)));
    }

    result.best = best.best;
    result.total_queries = spent();
    result.archive = std::move(archive);
    return result;
}

BoshResult run_single_attack(const AttackerConfig& ac_template, std::uint64_t seed,
                             std::uint64_t query_budget, InitMode init_mode, AttackEnv& env,
                             int init_retry_cap) {
    if (query_budget == 0) throw std::invalid_argument("query budget must be positive");
    std::uint64_t start = env.ledger->count;
    verify_clean_origin(env);

    // The budget is a per-direction budget, so it starts after verification,
    // exactly as a pool slot's accounting does.
    std::uint64_t dir_start = env.ledger->count;
    std::mt19937_64 init_rng(init_stream_seed(seed));
    Configuration cfg =
        sample_initial_direction(init_rng, env.model->dim(), init_mode, env, init_retry_cap);
    AttackerConfig ac = ac_template;
    ac.rng.seed(attacker_stream_seed(seed, 0));

    BoshResult result;
    result.origin_by_config.assign(1, Origin::initial);
    result.trace.push_back(TraceRecord{env.ledger->count, cfg.lambda, 0, 0});
    result.archive.push_back(ArchiveEntry{cfg.u, cfg.lambda});
    BestTracker best;
    best.offer(cfg);
    auto per_step = [&](const Configuration& cur) {
        result.archive.push_back(ArchiveEntry{cur.u, cur.lambda});
        best.offer(cur);
        return true;
    };
    int steps_taken = 0;
    while (env.ledger->count - dir_start < query_budget) {
        cfg = run_steps(cfg, ac, 1, env, &result.trace, 0, per_step);
        ++steps_taken;
    }

    result.best = best.best;
    result.total_queries = env.ledger->count - start;
    result.stage_log.push_back(
        StageStat{0, steps_taken, 1, result.best.lambda, env.ledger->count});
    return result;
}

}  // namespace bosh
