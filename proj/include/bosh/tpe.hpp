#pragma once

#include <random>
#include <utility>
#include <vector>

#include "bosh/attackers.hpp"
#include "bosh/geometry.hpp"

namespace bosh {

// Append-only record of every evaluated direction and its distortion.
struct ArchiveEntry {
    Vec u;
    double c_value = 0.0;
};

using Archive = std::vector<ArchiveEntry>;

// Isotropic Gaussian kernel density with one scalar bandwidth.
struct Kde {
    std::vector<Vec> points;
    double bandwidth = 1.0;
};

struct TpeConfig {
    double alpha = 0.20;       // low-cost quantile, also the score's gamma
    int inner_samples = 100;
    std::vector<double> bandwidth_grid;  // empty -> Scott pilot x {1/4,1/2,1,2,4}
    // true ranks candidates by maximal density ratio l/g (the expected-
    // improvement-equivalent direction); false keeps the minimal ratio
    // instead, for side-by-side comparison of the two conventions.
    bool select_max_ratio = true;
    int notfound_retry_cap = 10;
};

// Splits by the objective quantile: L gets the ceil(alpha*n) smallest
// c_values (stable on ties), H the rest. Requires n >= 2.
std::pair<Archive, Archive> split_archive(const Archive& archive, double alpha);

// log of the KDE density at u.
double kde_log_density(const Kde& kde, const Vec& u);

// Sum over points of the log mean-kernel density under the other n-1 points.
// This is the score fit_kde maximizes over its bandwidth grid. Requires n >= 2.
double kde_loo_log_likelihood(const std::vector<Vec>& points, double bandwidth);

// Scalar bandwidth by leave-one-out log-likelihood over the grid; ties break
// toward the smaller bandwidth. A single point takes the grid's middle value.
Kde fit_kde(const std::vector<Vec>& points, const std::vector<double>& grid);

// Candidate-count-preserving rank score: 1 / (gamma + (g/l) * (1 - gamma)).
// Strictly increasing in l/g, so ranking by it equals ranking by the ratio.
double ei_rank_score(double l, double g, double gamma);

struct CandidateDraw {
    Vec u;                                // chosen candidate (pre-normalization)
    double log_ratio = 0.0;               // log l(u) - log g(u) of the chosen one
    std::vector<double> batch_log_ratios; // scores of the whole inner batch
};

// Draws inner_samples candidates (random low-set point + Gaussian noise at
// the low KDE's bandwidth) and keeps the best-scoring one.
CandidateDraw draw_tpe_candidate(const Kde& kde_l, const Kde& kde_g, int inner_samples,
                                 std::mt19937_64& rng, bool select_max_ratio);

struct ResampleOutcome {
    std::vector<Configuration> configs;
    int failed_slots = 0;  // slots whose candidates all came back NotFound
};

// Draws T fresh configurations from the archive's density model. Every
// returned configuration is unit-norm with a verified finite distortion and
// origin resampled; config ids run from first_config_id.
ResampleOutcome tpe_resample(const Archive& archive, int T, const TpeConfig& cfg,
                             std::mt19937_64& rng, AttackEnv& env, int first_config_id);

}  // namespace bosh
