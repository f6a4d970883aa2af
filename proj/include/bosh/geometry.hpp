#pragma once

#include <cstdint>
#include <optional>

#include "bosh/vecmath.hpp"
#include "bosh/victim.hpp"

namespace bosh {

// Coarse/fine search controls for boundary-distance evaluation. tol_rel is
// relative to the bracket's upper end at refinement time.
struct DistortionParams {
    double lambda0 = 1.0;
    double growth = 2.0;
    double lambda_max = 100.0;
    double tol_rel = 1e-3;
    int shrink_steps = 20;  // floor for an already-adversarial lambda0
};

// Everything an attack operation needs to touch the victim. The ledger is
// shared and counts every query issued through this environment.
struct AttackEnv {
    const VictimModel* model = nullptr;
    Vec x0;
    Label y0;
    QueryLedger* ledger = nullptr;
    DistortionParams search;
};

struct Bracket {
    double lo = 0.0;  // clean endpoint (0 stands for x0 itself)
    double hi = 0.0;  // adversarial endpoint
};

struct DistanceResult {
    double lambda = 0.0;
    double bracket_width = 0.0;
    std::uint64_t queries_used = 0;
};

// One counted query: label of x0 + lambda * unit_u differs from y0.
bool is_adversarial_at(AttackEnv& env, const Vec& unit_u, double lambda);

// Geometric bracketing along u. Grows from lambda0 by `growth` up to
// lambda_max; an already-adversarial lambda0 shrinks by 1/growth instead
// (after shrink_steps tries, x0 itself serves as the clean endpoint, lo = 0).
// Returns nullopt when no tested lambda <= lambda_max is adversarial.
std::optional<Bracket> initial_distance(AttackEnv& env, const Vec& u,
                                        const DistortionParams& params);

// Bisection to absolute width tol; one query per halving, so the ledger delta
// is ceil(log2(width / tol)). The bracket endpoints are trusted unless
// verify_endpoints is set, which spends two extra queries up front.
DistanceResult binary_search_distance(AttackEnv& env, const Vec& u, Bracket bracket,
                                      double tol, bool verify_endpoints = false);

// Direction-space objective: the smallest scale at which x0 + lambda * u/||u||
// crosses the decision boundary. Composition of bracketing and bisection;
// invariant to positive rescaling of u.
std::optional<DistanceResult> distortion_c(AttackEnv& env, const Vec& u,
                                           const DistortionParams& params);

inline std::optional<DistanceResult> distortion_c(AttackEnv& env, const Vec& u) {
    return distortion_c(env, u, env.search);
}

}  // namespace bosh
