#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "bosh/bosh.hpp"

using namespace bosh;

namespace {

template <typename E, typename F>
void check_throws_with(F&& fn, const std::string& needle) {
    try {
        fn();
        FAIL_CHECK("expected an exception mentioning '" << needle << "'");
    } catch (const E& e) {
        CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                      "message '" << e.what() << "' lacks '" << needle << "'");
    }
}

struct Fixture {
    SyntheticLandscape model;
    QueryLedger ledger;
    AttackEnv env;

    explicit Fixture(SyntheticLandscape m) : model(std::move(m)) {
        env.model = &model;
        env.x0 = model.reference_point();
        env.y0 = Label{model.base_label()};
        env.ledger = &ledger;
    }
};

// Wide basins so the coarse octave ladder lands inside them from most angles.
Fixture wide_pair() {
    return Fixture{SyntheticLandscape(
        2, 0, {Basin{{3.0, 0.0}, 2.0, 1}, Basin{{-4.0, 0.0}, 1.5, 1}}, {0.0, 0.0})};
}

// Analytic minima 2.0 (first basin) and 2.6 (second basin).
Fixture two_minima() {
    return Fixture{SyntheticLandscape(
        2, 0, {Basin{{4.0, 0.0}, 2.0, 1}, Basin{{0.0, 5.2}, 2.6, 1}}, {0.0, 0.0})};
}

Pool pool_with(const std::vector<double>& lambdas) {
    Pool pool;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        PoolSlot slot;
        slot.cfg = Configuration{{1.0, 0.0}, lambdas[i], static_cast<int>(i), Origin::initial};
        pool.push_back(std::move(slot));
    }
    return pool;
}

std::vector<double> lambdas_of(const Pool& pool) {
    std::vector<double> out;
    for (const PoolSlot& s : pool) out.push_back(s.cfg.lambda);
    return out;
}

AttackerConfig signopt_template(int probes = 5) {
    AttackerConfig ac;
    ac.kind = AttackerKind::sign_opt;
    ac.num_probe_dirs = probes;
    ac.probe_radius = 0.05;
    ac.step_size = 0.2;
    return ac;
}

}  // namespace

TEST_CASE("the cut removes the worst half and keeps the two smallest") {
    Pool pool = pool_with({1.0, 2.0, 3.0, 4.0});
    cut_pool(pool, 0.5);
    CHECK(lambdas_of(pool) == std::vector<double>{1.0, 2.0});
}

TEST_CASE("a singleton pool is never cut") {
    Pool pool = pool_with({7.0});
    cut_pool(pool, 0.5);
    REQUIRE(pool.size() == 1);
    CHECK(pool[0].cfg.lambda == 7.0);
}

TEST_CASE("equal scores drop the later config ids first") {
    Pool pool = pool_with({5.0, 5.0, 5.0, 5.0});
    cut_pool(pool, 0.5);
    REQUIRE(pool.size() == 2);
    CHECK(pool[0].cfg.config_id == 0);
    CHECK(pool[1].cfg.config_id == 1);
}

TEST_CASE("the cut size floors the fraction with a guard for exact products") {
    CHECK(cut_count(10, 0.5) == 5);
    CHECK(cut_count(10, 0.3) == 3);  // 10 * 0.3 sits just below 3 in binary
    CHECK(cut_count(3, 0.5) == 1);
    CHECK(cut_count(7, 1.0 / 3.0) == 2);
    CHECK(cut_count(1, 0.9) == 0);   // the best always survives
    CHECK(cut_count(2, 0.9) == 1);   // capped at pool_size - 1
    check_throws_with<std::invalid_argument>(
        [] {
            Pool pool = pool_with({1.0, 2.0});
            cut_pool(pool, 1.0);
        },
        "cut_frac");
}

TEST_CASE("random cuts preserve the pool minimum and the exact survivor count") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> size_d(2, 12);
    std::uniform_real_distribution<double> lam_d(0.5, 9.5);
    std::uniform_real_distribution<double> frac_d(0.05, 0.95);
    for (int t = 0; t < 200; ++t) {
        int n = size_d(rng);
        std::vector<double> lams;
        for (int i = 0; i < n; ++i) lams.push_back(lam_d(rng));
        Pool pool = pool_with(lams);
        double frac = frac_d(rng);
        double before_min = *std::min_element(lams.begin(), lams.end());
        std::size_t expect = pool.size() - cut_count(pool.size(), frac);
        cut_pool(pool, frac);
        REQUIRE(pool.size() == expect);
        std::vector<double> after = lambdas_of(pool);
        CHECK(*std::min_element(after.begin(), after.end()) == before_min);
    }
}

TEST_CASE("pool initialization stamps ids, seeds the archive, and splits the ledger") {
    Fixture f = wide_pair();
    BoshConfig bc;
    bc.seed = 11;
    AttackerConfig ac = signopt_template();
    std::mt19937_64 rng(init_stream_seed(bc.seed));

    Trace births;
    auto [pool, archive] = init_pool(4, bc, ac, f.env, rng, &births);
    REQUIRE(pool.size() == 4);
    REQUIRE(archive.size() == 4);
    REQUIRE(births.size() == 4);
    std::uint64_t spent_sum = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        CHECK(pool[i].cfg.config_id == static_cast<int>(i));
        CHECK(pool[i].cfg.origin == Origin::initial);
        CHECK(archive[i].u == pool[i].cfg.u);
        CHECK(archive[i].c_value == pool[i].cfg.lambda);
        CHECK(births[i].config_id == static_cast<int>(i));
        CHECK(births[i].stage_index == 0);
        CHECK(births[i].best_lambda == pool[i].cfg.lambda);
        spent_sum += pool[i].queries_spent;
    }
    CHECK(spent_sum == f.ledger.count);  // every query is owned by exactly one slot
    for (std::size_t i = 1; i < births.size(); ++i)
        CHECK(births[i].queries_cumulative > births[i - 1].queries_cumulative);

    check_throws_with<std::invalid_argument>(
        [&] { init_pool(0, bc, ac, f.env, rng); }, "k must be positive");
}

TEST_CASE("stage lengths follow the rounded geometric schedule") {
    CHECK(std::llround(3500 * 1.4) == 4900);
    CHECK(std::llround(4900 * 1.4) == 6860);

    Fixture f = wide_pair();
    BoshConfig bc;
    bc.k = 6;
    bc.m0 = 2;
    bc.interval_ratio = 1.4;
    bc.cut_frac = 0.5;
    bc.resample_cap = 3;
    bc.per_direction_query_budget = 100000;  // freezing never triggers here
    bc.total_query_budget = 6000;
    bc.seed = 3;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);

    REQUIRE(res.stage_log.size() >= 5);
    int expect = 2;
    for (std::size_t s = 0; s < 5; ++s) {
        CHECK(res.stage_log[s].stage_index == static_cast<int>(s));
        CHECK(res.stage_log[s].steps == expect);
        expect = static_cast<int>(std::llround(expect * bc.interval_ratio));
    }
    // Matched-to-cut resampling: 6 -> 3 + 1, then 4 -> 2 + 1 = 3 thereafter.
    CHECK(res.stage_log[0].pool_size == 6);
    CHECK(res.stage_log[1].pool_size == 4);
    CHECK(res.stage_log[2].pool_size == 3);
    CHECK(res.stage_log[3].pool_size == 3);
}

TEST_CASE("the total budget stops the run within one step's overshoot") {
    Fixture f = wide_pair();
    BoshConfig bc;
    bc.k = 3;
    bc.m0 = 4;
    bc.per_direction_query_budget = 100000;
    bc.total_query_budget = 500;
    bc.seed = 9;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);
    CHECK(res.total_queries >= 500);
    CHECK(res.total_queries <= 560);  // one sign-opt step of slack
    CHECK(res.total_queries == f.ledger.count);
    CHECK(res.stage_log.back().queries_at_end == f.ledger.count);
}

TEST_CASE("a zero total budget defaults to k times the per-direction budget") {
    Fixture f = wide_pair();
    BoshConfig bc;
    bc.k = 2;
    bc.m0 = 50;  // one long stage, so no slot is cut before the ceiling binds
    bc.per_direction_query_budget = 100;
    bc.total_query_budget = 0;
    bc.seed = 9;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);
    CHECK(res.total_queries >= 200);
    CHECK(res.total_queries <= 260);
}

TEST_CASE("a budget below the setup cost still initializes and then stops") {
    Fixture f = wide_pair();
    BoshConfig bc;
    bc.k = 3;
    bc.m0 = 7;
    bc.total_query_budget = 2;
    bc.seed = 5;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);
    REQUIRE(res.stage_log.size() == 1);
    CHECK(res.stage_log[0].steps == 7);      // planned, never executed
    CHECK(res.stage_log[0].pool_size == 3);
    CHECK(res.trace.size() == 3);            // birth records only
    CHECK(res.archive.size() == 3);
    CHECK(res.total_queries == f.ledger.count);
}

TEST_CASE("per-direction exhaustion freezes every slot and ends the run") {
    Fixture f = wide_pair();
    BoshConfig bc;
    bc.k = 2;
    bc.m0 = 50;  // one long stage, so both slots exhaust before any cut
    bc.per_direction_query_budget = 120;
    bc.total_query_budget = 100000;  // only freezing can stop this run
    bc.seed = 17;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);
    CHECK(res.total_queries > 240);  // both slots ran their budgets down
    CHECK(res.total_queries < 400);
    CHECK(res.total_queries == f.ledger.count);
}

TEST_CASE("a k of one with no resampling replays the plain attacker bit for bit") {
    for (AttackerKind kind :
         {AttackerKind::sign_opt, AttackerKind::opt, AttackerKind::boundary}) {
        AttackerConfig ac = signopt_template();
        ac.kind = kind;

        Fixture fa = wide_pair();
        BoshConfig bc;
        bc.k = 1;
        bc.m0 = 5;  // several stage boundaries, which must not disturb stepping
        bc.resample_cap = 0;
        bc.per_direction_query_budget = 400;
        bc.total_query_budget = 100000;
        bc.seed = 29;
        BoshResult meta = run_bosh(bc, ac, fa.env);

        Fixture fb = wide_pair();
        BoshResult plain = run_single_attack(ac, 29, 400, InitMode::gaussian, fb.env);

        CHECK(meta.best.u == plain.best.u);
        CHECK(meta.best.lambda == plain.best.lambda);
        CHECK(meta.total_queries == plain.total_queries);
        REQUIRE(meta.archive.size() == plain.archive.size());
        for (std::size_t i = 0; i < meta.archive.size(); ++i) {
            CHECK(meta.archive[i].u == plain.archive[i].u);
            CHECK(meta.archive[i].c_value == plain.archive[i].c_value);
        }
        REQUIRE(meta.trace.size() == plain.trace.size());
        for (std::size_t i = 0; i < meta.trace.size(); ++i) {
            // Stage indices differ by bookkeeping; the computation must not.
            CHECK(meta.trace[i].queries_cumulative == plain.trace[i].queries_cumulative);
            CHECK(meta.trace[i].best_lambda == plain.trace[i].best_lambda);
            CHECK(meta.trace[i].config_id == plain.trace[i].config_id);
        }
    }
}

TEST_CASE("the single-run driver accounts its trace, archive, and stage summary") {
    Fixture f = wide_pair();
    BoshResult res = run_single_attack(signopt_template(), 7, 300, InitMode::gaussian, f.env);
    CHECK(res.total_queries == f.ledger.count);
    CHECK(res.total_queries > 300);        // the budget is crossed mid-step
    CHECK(res.total_queries <= 300 + 32);  // verify plus one sign-opt step at most
    REQUIRE(res.stage_log.size() == 1);
    CHECK(res.stage_log[0].pool_size == 1);
    CHECK(res.trace.size() == static_cast<std::size_t>(res.stage_log[0].steps) + 1);
    CHECK(res.archive.size() == res.trace.size());
    CHECK(res.stage_log[0].best_lambda == res.best.lambda);
    REQUIRE(res.origin_by_config.size() == 1);
    CHECK(res.origin_by_config[0] == Origin::initial);

    check_throws_with<std::invalid_argument>(
        [&] { run_single_attack(signopt_template(), 7, 0, InitMode::gaussian, f.env); },
        "query budget");
}

TEST_CASE("resampled slots are stamped, archived, and traced from their birth stage") {
    Fixture f = wide_pair();
    BoshConfig bc;
    bc.k = 4;
    bc.m0 = 2;
    bc.cut_frac = 0.5;
    bc.resample_cap = 2;
    bc.per_direction_query_budget = 100000;
    bc.total_query_budget = 3000;
    bc.seed = 41;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);

    REQUIRE(res.origin_by_config.size() > 4);  // at least one resample happened
    for (std::size_t id = 0; id < res.origin_by_config.size(); ++id)
        CHECK(res.origin_by_config[id] == (id < 4 ? Origin::initial : Origin::resampled));

    // Every trace record owns exactly one archive entry with the same score.
    REQUIRE(res.archive.size() == res.trace.size());
    int max_id = 0;
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
        CHECK(res.trace[i].best_lambda == res.archive[i].c_value);
        max_id = std::max(max_id, res.trace[i].config_id);
    }
    CHECK(max_id == static_cast<int>(res.origin_by_config.size()) - 1);

    // Resampled configurations first appear at a stage past their ancestors.
    for (const TraceRecord& rec : res.trace)
        if (rec.config_id >= 4) CHECK(rec.stage_index >= 1);

    // The reported best is the archive minimum and stage bests never rise.
    double archive_min = res.archive[0].c_value;
    for (const ArchiveEntry& e : res.archive) archive_min = std::min(archive_min, e.c_value);
    CHECK(res.best.lambda == archive_min);
    for (std::size_t s = 1; s < res.stage_log.size(); ++s)
        CHECK(res.stage_log[s].best_lambda <= res.stage_log[s - 1].best_lambda);
}

TEST_CASE("a fixed resample rule tops the pool back up by the requested count") {
    Fixture f = wide_pair();
    BoshConfig bc;
    bc.k = 4;
    bc.m0 = 2;
    bc.cut_frac = 0.5;
    bc.resample_rule = ResampleRule::fixed;
    bc.resample_fixed = 2;
    bc.resample_cap = 3;
    bc.per_direction_query_budget = 100000;
    bc.total_query_budget = 2500;
    bc.seed = 13;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);
    REQUIRE(res.stage_log.size() >= 3);
    // 4 -> cut 2 -> add 2: the pool holds steady at 4.
    CHECK(res.stage_log[0].pool_size == 4);
    CHECK(res.stage_log[1].pool_size == 4);
    CHECK(res.stage_log[2].pool_size == 4);

    // The cap binds the fixed rule too.
    Fixture g = wide_pair();
    bc.resample_fixed = 5;
    bc.resample_cap = 1;
    BoshResult capped = run_bosh(bc, signopt_template(), g.env);
    REQUIRE(capped.stage_log.size() >= 2);
    CHECK(capped.stage_log[1].pool_size == 3);  // 4 -> cut 2 -> add 1
}

TEST_CASE("counting the matched resamples before the cut doubles the refill") {
    for (bool precut : {false, true}) {
        Fixture f = wide_pair();
        BoshConfig bc;
        bc.k = 4;
        bc.m0 = 2;
        bc.cut_frac = 0.5;
        bc.resample_precut_count = precut;
        bc.resample_cap = 3;
        bc.per_direction_query_budget = 100000;
        bc.total_query_budget = 2500;
        bc.seed = 21;
        BoshResult res = run_bosh(bc, signopt_template(), f.env);
        REQUIRE(res.stage_log.size() >= 2);
        // Post-cut matching: floor(2 * 0.5) = 1 refill. Pre-cut: floor(4 * 0.5) = 2.
        CHECK(res.stage_log[1].pool_size == (precut ? 4 : 3));
    }
}

TEST_CASE("the meta loop finds the smaller of two analytic minima") {
    Fixture f = two_minima();
    BoshConfig bc;
    bc.k = 8;
    bc.m0 = 3;
    bc.per_direction_query_budget = 800;
    bc.total_query_budget = 0;  // 8 * 800
    bc.seed = 1;
    BoshResult res = run_bosh(bc, signopt_template(), f.env);
    CHECK(res.best.lambda >= 2.0);  // nothing adversarial sits closer than the basin
    CHECK(res.best.lambda <= 2.1);
}

TEST_CASE("identical seeds reproduce the whole meta run") {
    auto once = [] {
        Fixture f = wide_pair();
        BoshConfig bc;
        bc.k = 3;
        bc.m0 = 2;
        bc.per_direction_query_budget = 100000;
        bc.total_query_budget = 1500;
        bc.seed = 77;
        return run_bosh(bc, signopt_template(), f.env);
    };
    BoshResult a = once();
    BoshResult b = once();
    CHECK(a.best.u == b.best.u);
    CHECK(a.best.lambda == b.best.lambda);
    CHECK(a.total_queries == b.total_queries);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i)
        CHECK(a.trace[i].queries_cumulative == b.trace[i].queries_cumulative);

    Fixture g = wide_pair();
    BoshConfig bc;
    bc.k = 3;
    bc.m0 = 2;
    bc.per_direction_query_budget = 100000;
    bc.total_query_budget = 1500;
    bc.seed = 78;
    BoshResult c = run_bosh(bc, signopt_template(), g.env);
    CHECK(c.best.u != a.best.u);  // a new seed explores differently
}

TEST_CASE("misconfigured meta parameters are rejected before any query") {
    Fixture f = wide_pair();
    AttackerConfig ac = signopt_template();
    auto expect = [&](void (*mutate)(BoshConfig&), const std::string& needle) {
        BoshConfig bc;
        mutate(bc);
        check_throws_with<std::invalid_argument>([&] { run_bosh(bc, ac, f.env); }, needle);
    };
    expect([](BoshConfig& b) { b.k = 0; }, "k must be positive");
    expect([](BoshConfig& b) { b.m0 = 0; }, "m0");
    expect([](BoshConfig& b) { b.cut_frac = 0.0; }, "cut_frac");
    expect([](BoshConfig& b) { b.cut_frac = 1.0; }, "cut_frac");
    expect([](BoshConfig& b) { b.interval_ratio = 0.9; }, "interval_ratio");
    expect(
        [](BoshConfig& b) {
            b.resample_rule = ResampleRule::fixed;
            b.resample_fixed = -1;
        },
        "resample");
    expect([](BoshConfig& b) { b.resample_cap = -1; }, "resample_cap");
    expect([](BoshConfig& b) { b.per_direction_query_budget = 0; }, "per-direction");
    CHECK(f.ledger.count == 0);
}

TEST_CASE("an already-adversarial starting point is refused") {
    Fixture f = wide_pair();
    f.env.y0 = Label{1};  // claims the clean label is 1; the model says 0
    BoshConfig bc;
    bc.k = 2;
    check_throws_with<std::invalid_argument>(
        [&] { run_bosh(bc, signopt_template(), f.env); }, "clean label");
    CHECK(f.ledger.count == 1);  // exactly the verification query

    Fixture g = wide_pair();
    g.env.y0 = Label{1};
    check_throws_with<std::invalid_argument>(
        [&] { run_single_attack(signopt_template(), 1, 100, InitMode::gaussian, g.env); },
        "clean label");
    CHECK(g.ledger.count == 1);
}
