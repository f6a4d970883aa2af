#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "bosh/geometry.hpp"

namespace bosh {

enum class AttackerKind { sign_opt, opt, boundary };
enum class InitMode { gaussian, uniform };
enum class Origin { initial, resampled };

// One attack trajectory: a unit direction and its most recent verified
// boundary distance. lambda never increases under any step.
struct Configuration {
    Vec u;
    double lambda = 0.0;
    int config_id = 0;
    Origin origin = Origin::initial;
};

// Stepping knobs plus the per-trajectory RNG stream. probe_radius and
// step_size are relative to the current lambda. walk_scale and accept_ema
// hold the boundary walk's acceptance-rate adaptation.
struct AttackerConfig {
    AttackerKind kind = AttackerKind::sign_opt;
    int num_probe_dirs = 20;
    double probe_radius = 0.01;
    double step_size = 0.2;
    int max_backtracks = 15;
    std::mt19937_64 rng;
    double walk_scale = 1.0;
    double accept_ema = 0.25;
};

struct TraceRecord {
    std::uint64_t queries_cumulative = 0;
    double best_lambda = 0.0;
    int config_id = 0;
    int stage_index = 0;
};

using Trace = std::vector<TraceRecord>;

// Draws directions (per mode) until one has finite distortion; throws after
// retry_cap failures. The returned configuration has origin initial, id 0.
Configuration sample_initial_direction(std::mt19937_64& rng, int d, InitMode mode,
                                       AttackEnv& env, int retry_cap = 50);

// Single-query gradient-sign estimate: probe w = normalize(u + eps*v) counts
// -1 when x0 + lambda*w is already adversarial, +1 otherwise.
Vec estimate_signopt_gradient(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env);

// Finite-difference estimate (C(u + eps*v) - C(u)) / eps per probe, averaged
// over probes whose distortion exists.
Vec estimate_opt_gradient(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env);

Configuration signopt_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env);
Configuration opt_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env);
Configuration boundary_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env);

Configuration attack_step(const Configuration& cfg, AttackerConfig& ac, AttackEnv& env);

// Advances n_steps, appending one trace record per step. The optional
// per_step hook sees the configuration after each step; returning false
// stops the run early (budget enforcement hooks in here).
Configuration run_steps(const Configuration& cfg, AttackerConfig& ac, int n_steps,
                        AttackEnv& env, Trace* sink = nullptr, int stage_index = 0,
                        const std::function<bool(const Configuration&)>& per_step = {});

}  // namespace bosh
