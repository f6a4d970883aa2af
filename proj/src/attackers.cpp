#include "bosh/attackers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bosh {

namespace {

void check_attacker(const AttackerConfig& ac) {
    if (ac.num_probe_dirs < 1) throw std::invalid_argument("num_probe_dirs must be positive");
    if (!(ac.probe_radius > 0.0)) throw std::invalid_argument("probe_radius must be positive");
    if (!(ac.step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
    if (ac.max_backtracks < 0) throw std::invalid_argument("max_backtracks must be non-negative");
}

void check_config(const Configuration& cfg, const AttackEnv& env) {
    if (cfg.u.size() != env.x0.size())
        throw std::invalid_argument("configuration direction does not match the model dimension");
    if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda))
        throw std::invalid_argument("configuration lambda must be positive and finite");
}

// Shared acceptance rule for gradient steps: the candidate direction is taken
// iff the boundary along it is no further than the current lambda (checked
// with a single query at distance lambda), in which case the distance is
// refined against the clean origin. Rejections halve eta and leave the input
// untouched after max_backtracks tries.
Configuration backtracked_update(const Configuration& cfg, const Vec& g_hat,
                                 AttackerConfig& ac, AttackEnv& env) {
    double eta = ac.step_size * cfg.lambda;
    for (int t = 0; t <= ac.max_backtracks; ++t) {
        Vec u_new = normalized(add_scaled(cfg.u, -eta, g_hat));
        if (is_adversarial_at(env, u_new, cfg.lambda)) {
            double tol = env.search.tol_rel * cfg.lambda;
            DistanceResult res = binary_search_distance(env, u_new, Bracket{0.0, cfg.lambda}, tol);
            Configuration out = cfg;
            out.u = std::move(u_new);
            out.lambda = res.lambda;
            return out;
        }
        eta /= 2.0;
    }
    return cfg;
}

}  // namespace

Configuration sample_initial_direction(std::mt19937_64& rng, int d, InitMode mode,
                                       AttackEnv& env, int retry_cap) {
    if (d < 1) throw std::invalid_argument("dimension must be positive");
    for (int attempt = 0; attempt < retry_cap; ++attempt) {
        Vec u = mode == InitMode::gaussian ? unit_gaussian_vec(rng, d) : unit_uniform_vec(rng, d);
        std::optional<DistanceResult> c = distortion_c(env, u, env.search);
        if (c) return Configuration{std::move(u), c->lambda, 0, Origin::initial};
    }
    throw std::runtime_error("initialization failed: no sampled direction reaches the boundary "
                             "within lambda_max");
}

Vec estimate_signopt_gradient(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env) {
    check_attacker(ac);
    check_config(cfg, env);
    double eps = ac.probe_radius * cfg.lambda;
    Vec g_hat(cfg.u.size(), 0.0);
    for (int q = 0; q < ac.num_probe_dirs; ++q) {
        Vec v = unit_gaussian_vec(ac.rng, static_cast<int>(cfg.u.size()));
        Vec w = normalized(add_scaled(cfg.u, eps, v));
        double sign = is_adversarial_at(env, w, cfg.lambda) ? -1.0 : 1.0;
        for (std::size_t i = 0; i < g_hat.size(); ++i) g_hat[i] += sign * v[i];
    }
    for (double& x : g_hat) x /= ac.num_probe_dirs;
    return g_hat;
}

Vec estimate_opt_gradient(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env) {
    check_attacker(ac);
    check_config(cfg, env);
    double eps = ac.probe_radius * cfg.lambda;
    DistortionParams probe_params = env.search;
    probe_params.lambda0 = cfg.lambda;  // boundary is near the current distance
    Vec g_hat(cfg.u.size(), 0.0);
    int used = 0;
    for (int q = 0; q < ac.num_probe_dirs; ++q) {
        Vec v = unit_gaussian_vec(ac.rng, static_cast<int>(cfg.u.size()));
        std::optional<DistanceResult> c = distortion_c(env, add_scaled(cfg.u, eps, v), probe_params);
        if (!c) continue;  // probes that miss the boundary are skipped
        double fd = (c->lambda - cfg.lambda) / eps;
        for (std::size_t i = 0; i < g_hat.size(); ++i) g_hat[i] += fd * v[i];
        ++used;
    }
    if (used > 0)
        for (double& x : g_hat) x /= used;
    return g_hat;
}

Configuration signopt_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env) {
    Vec g_hat = estimate_signopt_gradient(cfg, ac, env);
    if (!(norm(g_hat) > 0.0)) return cfg;  // probe signs cancelled exactly
    return backtracked_update(cfg, g_hat, ac, env);
}

Configuration opt_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env) {
    Vec g_hat = estimate_opt_gradient(cfg, ac, env);
    if (!(norm(g_hat) > 0.0)) return cfg;  // every probe missed the boundary
    return backtracked_update(cfg, g_hat, ac, env);
}

Configuration boundary_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env) {
    check_attacker(ac);
    check_config(cfg, env);
    int d = static_cast<int>(cfg.u.size());
    double eps = ac.probe_radius * ac.walk_scale * cfg.lambda;
    double eta = std::clamp(ac.step_size * ac.walk_scale, 1e-6, 0.5);

    // Orthogonal jitter on the sphere of radius lambda around x0, then a step
    // toward x0 by factor (1 - eta).
    Vec noise = gaussian_vec(ac.rng, d);
    double along = dot(noise, cfg.u);
    for (int i = 0; i < d; ++i) noise[i] -= along * cfg.u[i];
    double nn = norm(noise);
    if (!(nn > 0.0)) return cfg;
    for (double& x : noise) x *= eps / nn;

    Vec q(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) q[i] = cfg.lambda * cfg.u[i] + noise[i];
    double qn = norm(q);
    for (double& x : q) x *= cfg.lambda / qn;        // back onto the sphere
    for (double& x : q) x *= 1.0 - eta;              // contract toward x0

    Vec candidate = add_scaled(env.x0, 1.0, q);
    bool adversarial = predict(*env.model, candidate, *env.ledger) != env.y0;
    double new_lambda = norm(q);
    bool accepted = adversarial && new_lambda < cfg.lambda;

    ac.accept_ema = 0.9 * ac.accept_ema + 0.1 * (accepted ? 1.0 : 0.0);
    ac.walk_scale *= ac.accept_ema > 0.25 ? 1.05 : 0.95;
    ac.walk_scale = std::clamp(ac.walk_scale, 1e-3, 1e3);

    if (!accepted) return cfg;
    Configuration out = cfg;
    out.u = normalized(q);
    out.lambda = new_lambda;
    return out;
}

Configuration attack_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env) {
    switch (ac.kind) {
        case AttackerKind::sign_opt: return signopt_step(cfg, ac, env);
        case AttackerKind::opt: return opt_step(cfg, ac, env);
        case AttackerKind::boundary: return boundary_step(cfg, ac, env);
    }
    throw std::invalid_argument("unknown attacker kind");
}

Configuration run_steps(const Configuration& cfg, AttackerConfig& ac, int n_steps, AttackEnv& env,
                        Trace* sink, int stage_index,
                        const std::function<bool(const Configuration&)>& per_step) {
    if (n_steps < 0) throw std::invalid_argument("n_steps must be non-negative");
    Configuration cur = cfg;
    for (int i = 0; i < n_steps; ++i) {
        cur = attack_step(cur, ac, env);
        if (sink)
            sink->push_back(TraceRecord{env.ledger->count, cur.lambda, cur.config_id, stage_index});
        if (per_step && !per_step(cur)) break;
    }
    return cur;
}

}  // namespace bosh
