#include "bosh/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace bosh {

namespace {

void check_env(const AttackEnv& env) {
    if (env.model == nullptr || env.ledger == nullptr)
        throw std::invalid_argument("attack environment needs a model and a ledger");
    if (static_cast<int>(env.x0.size()) != env.model->dim())
        throw std::invalid_argument("attack environment x0 does not match the model dimension");
}

void check_params(const DistortionParams& p) {
    if (!(p.lambda0 > 0.0) || !std::isfinite(p.lambda0))
        throw std::invalid_argument("lambda0 must be positive and finite");
    if (!(p.growth > 1.0) || !std::isfinite(p.growth))
        throw std::invalid_argument("growth must exceed 1");
    if (!(p.lambda_max >= p.lambda0) || !std::isfinite(p.lambda_max))
        throw std::invalid_argument("lambda_max must be at least lambda0");
    if (!(p.tol_rel > 0.0) || !std::isfinite(p.tol_rel))
        throw std::invalid_argument("tol_rel must be positive");
    if (p.shrink_steps < 1) throw std::invalid_argument("shrink_steps must be positive");
}

bool probe(AttackEnv& env, const Vec& unit_u, double lambda) {
    return predict(*env.model, add_scaled(env.x0, lambda, unit_u), *env.ledger) != env.y0;
}

// Assumes unit_u is already normalized.
std::optional<Bracket> coarse_bracket(AttackEnv& env, const Vec& unit_u,
                                      const DistortionParams& p) {
    if (probe(env, unit_u, p.lambda0)) {
        // Already adversarial: shrink geometrically until a clean point appears.
        double hi = p.lambda0;
        for (int k = 0; k < p.shrink_steps; ++k) {
            double cand = hi / p.growth;
            if (!probe(env, unit_u, cand)) return Bracket{cand, hi};
            hi = cand;
        }
        return Bracket{0.0, hi};  // x0 itself is the clean endpoint
    }
    double lo = p.lambda0;
    while (lo < p.lambda_max) {
        double next = lo * p.growth;
        if (next > p.lambda_max) next = p.lambda_max;
        if (probe(env, unit_u, next)) return Bracket{lo, next};
        lo = next;
    }
    return std::nullopt;
}

DistanceResult bisect(AttackEnv& env, const Vec& unit_u, Bracket b, double tol) {
    std::uint64_t start = env.ledger->count;
    double lo = b.lo;
    double hi = b.hi;
    while (hi - lo > tol) {
        double mid = lo + (hi - lo) / 2.0;
        if (mid <= lo || mid >= hi) break;  // floating-point floor reached
        if (probe(env, unit_u, mid))
            hi = mid;
        else
            lo = mid;
    }
    return DistanceResult{hi, hi - lo, env.ledger->count - start};
}

}  // namespace

bool is_adversarial_at(AttackEnv& env, const Vec& unit_u, double lambda) {
    check_env(env);
    return probe(env, unit_u, lambda);
}

std::optional<Bracket> initial_distance(AttackEnv& env, const Vec& u,
                                        const DistortionParams& params) {
    check_env(env);
    check_params(params);
    return coarse_bracket(env, normalized(u), params);
}

DistanceResult binary_search_distance(AttackEnv& env, const Vec& u, Bracket bracket, double tol,
                                      bool verify_endpoints) {
    check_env(env);
    if (!(tol > 0.0) || !std::isfinite(tol)) throw std::invalid_argument("tol must be positive");
    if (!(bracket.lo >= 0.0) || !(bracket.hi > bracket.lo) || !std::isfinite(bracket.hi))
        throw std::invalid_argument("bracket must satisfy 0 <= lo < hi < inf");
    Vec unit_u = normalized(u);
    std::uint64_t start = env.ledger->count;
    if (verify_endpoints) {
        if (!probe(env, unit_u, bracket.hi))
            throw std::invalid_argument("bracket hi must be adversarial");
        if (bracket.lo > 0.0 && probe(env, unit_u, bracket.lo))
            throw std::invalid_argument("bracket lo must be clean");
    }
    DistanceResult res = bisect(env, unit_u, bracket, tol);
    res.queries_used = env.ledger->count - start;
    return res;
}

std::optional<DistanceResult> distortion_c(AttackEnv& env, const Vec& u,
                                           const DistortionParams& params) {
    check_env(env);
    check_params(params);
    Vec unit_u = normalized(u);
    std::uint64_t start = env.ledger->count;
    std::optional<Bracket> bracket = coarse_bracket(env, unit_u, params);
    if (!bracket) return std::nullopt;
    DistanceResult res = bisect(env, unit_u, *bracket, params.tol_rel * bracket->hi);
    res.queries_used = env.ledger->count - start;
    return res;
}

}  // namespace bosh
