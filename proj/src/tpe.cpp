#include "bosh/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bosh {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// ceil with a relative guard so an exactly-integral alpha * n stays put.
std::size_t quantile_count(std::size_t n, double alpha) {
    double raw = alpha * static_cast<double>(n);
    return static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

// Scott pilot bandwidth from the pooled per-coordinate spread.
double scott_pilot(const std::vector<Vec>& points) {
    std::size_t n = points.size();
    std::size_t d = points.front().size();
    if (n < 2) return 0.1;
    Vec mean(d, 0.0);
    for (const Vec& p : points)
        for (std::size_t i = 0; i < d; ++i) mean[i] += p[i];
    for (double& m : mean) m /= static_cast<double>(n);
    double var = 0.0;
    for (const Vec& p : points) var += squared_distance(p, mean);
    var /= static_cast<double>(n) * static_cast<double>(d);
    double sigma = std::sqrt(var);
    if (!(sigma > 1e-12)) sigma = 0.1;
    return sigma * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
}

std::vector<double> default_grid(const std::vector<Vec>& points) {
    double pilot = scott_pilot(points);
    return {0.25 * pilot, 0.5 * pilot, pilot, 2.0 * pilot, 4.0 * pilot};
}

}  // namespace

double kde_loo_log_likelihood(const std::vector<Vec>& points, double b) {
    if (points.size() < 2)
        throw std::invalid_argument("leave-one-out needs at least two points");
    if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("bandwidth must be positive");
    std::size_t n = points.size();
    std::size_t d = points.front().size();
    for (const Vec& p : points)
        if (p.size() != d) throw std::invalid_argument("points must share a dimension");
    double inv2b2 = 1.0 / (2.0 * b * b);
    double log_norm = -0.5 * static_cast<double>(d) * std::log(kTwoPi * b * b);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // log of the mean kernel over the other points, via log-sum-exp.
        double max_exp = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            max_exp = std::max(max_exp, -squared_distance(points[i], points[j]) * inv2b2);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum += std::exp(-squared_distance(points[i], points[j]) * inv2b2 - max_exp);
        }
        total += max_exp + std::log(sum / static_cast<double>(n - 1)) + log_norm;
    }
    return total;
}

std::pair<Archive, Archive> split_archive(const Archive& archive, double alpha) {
    if (archive.size() < 2)
        throw std::invalid_argument("split_archive: need at least two entries");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("split_archive: alpha must lie in (0, 1)");
    for (const ArchiveEntry& e : archive)
        if (!std::isfinite(e.c_value))
            throw std::invalid_argument("split_archive: c_values must be finite");

    std::vector<std::size_t> order(archive.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return archive[a].c_value < archive[b].c_value;
    });
    std::size_t n_low = quantile_count(archive.size(), alpha);
    Archive low, high;
    for (std::size_t r = 0; r < order.size(); ++r)
        (r < n_low ? low : high).push_back(archive[order[r]]);
    return {std::move(low), std::move(high)};
}

double kde_log_density(const Kde& kde, const Vec& u) {
    if (kde.points.empty()) throw std::invalid_argument("kde has no points");
    if (!(kde.bandwidth > 0.0)) throw std::invalid_argument("kde bandwidth must be positive");
    if (u.size() != kde.points.front().size())
        throw std::invalid_argument("kde query dimension mismatch");
    double b = kde.bandwidth;
    double inv2b2 = 1.0 / (2.0 * b * b);
    double max_exp = -std::numeric_limits<double>::infinity();
    for (const Vec& p : kde.points)
        max_exp = std::max(max_exp, -squared_distance(u, p) * inv2b2);
    double sum = 0.0;
    for (const Vec& p : kde.points) sum += std::exp(-squared_distance(u, p) * inv2b2 - max_exp);
    double d = static_cast<double>(u.size());
    return max_exp + std::log(sum / static_cast<double>(kde.points.size())) -
           0.5 * d * std::log(kTwoPi * b * b);
}

Kde fit_kde(const std::vector<Vec>& points, const std::vector<double>& grid_in) {
    if (points.empty()) throw std::invalid_argument("fit_kde: need at least one point");
    std::size_t d = points.front().size();
    for (const Vec& p : points) {
        if (p.size() != d) throw std::invalid_argument("fit_kde: points must share a dimension");
        if (!all_finite(p)) throw std::invalid_argument("fit_kde: points must be finite");
    }
    std::vector<double> grid = grid_in.empty() ? default_grid(points) : grid_in;
    for (double b : grid)
        if (!(b > 0.0) || !std::isfinite(b))
            throw std::invalid_argument("fit_kde: bandwidth grid must be positive");
    std::sort(grid.begin(), grid.end());

    if (points.size() == 1) return Kde{points, grid[(grid.size() - 1) / 2]};

    double best_b = grid.front();
    double best_ll = -std::numeric_limits<double>::infinity();
    for (double b : grid) {
        double ll = kde_loo_log_likelihood(points, b);
        if (ll > best_ll) {  // ties keep the smaller bandwidth
            best_ll = ll;
            best_b = b;
        }
    }
    return Kde{points, best_b};
}

double ei_rank_score(double l, double g, double gamma) {
    if (!(l > 0.0) || !(g > 0.0)) throw std::invalid_argument("densities must be positive");
    if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    return 1.0 / (gamma + (g / l) * (1.0 - gamma));
}

CandidateDraw draw_tpe_candidate(const Kde& kde_l, const Kde& kde_g, int inner_samples,
                                 std::mt19937_64& rng, bool select_max_ratio) {
    if (inner_samples < 1) throw std::invalid_argument("inner_samples must be positive");
    if (kde_l.points.empty() || kde_g.points.empty())
        throw std::invalid_argument("both density models need points");
    std::uniform_int_distribution<std::size_t> pick(0, kde_l.points.size() - 1);
    int d = static_cast<int>(kde_l.points.front().size());

    CandidateDraw out;
    out.batch_log_ratios.reserve(static_cast<std::size_t>(inner_samples));
    double best = select_max_ratio ? -std::numeric_limits<double>::infinity()
                                   : std::numeric_limits<double>::infinity();
    for (int s = 0; s < inner_samples; ++s) {
        Vec cand = add_scaled(kde_l.points[pick(rng)], kde_l.bandwidth, gaussian_vec(rng, d));
        double log_ratio = kde_log_density(kde_l, cand) - kde_log_density(kde_g, cand);
        out.batch_log_ratios.push_back(log_ratio);
        bool better = select_max_ratio ? log_ratio > best : log_ratio < best;
        if (better) {
            best = log_ratio;
            out.u = std::move(cand);
            out.log_ratio = log_ratio;
        }
    }
    return out;
}

ResampleOutcome tpe_resample(const Archive& archive, int T, const TpeConfig& cfg,
                             std::mt19937_64& rng, AttackEnv& env, int first_config_id) {
    if (T < 0) throw std::invalid_argument("tpe_resample: T must be non-negative");
    ResampleOutcome out;
    if (T == 0) return out;
    auto [low, high] = split_archive(archive, cfg.alpha);
    if (high.empty())
        throw std::invalid_argument("tpe_resample: alpha leaves no high-cost entries");

    auto points_of = [](const Archive& part) {
        std::vector<Vec> pts;
        pts.reserve(part.size());
        for (const ArchiveEntry& e : part) pts.push_back(e.u);
        return pts;
    };
    Kde kde_l = fit_kde(points_of(low), cfg.bandwidth_grid);
    Kde kde_g = fit_kde(points_of(high), cfg.bandwidth_grid);

    int next_id = first_config_id;
    for (int t = 0; t < T; ++t) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.notfound_retry_cap; ++attempt) {
            CandidateDraw draw =
                draw_tpe_candidate(kde_l, kde_g, cfg.inner_samples, rng, cfg.select_max_ratio);
            if (!(norm(draw.u) > 0.0)) continue;
            Vec unit_u = normalized(draw.u);
            std::optional<DistanceResult> c = distortion_c(env, unit_u, env.search);
            if (!c) continue;  // candidate never reaches the boundary; redraw
            out.configs.push_back(
                Configuration{std::move(unit_u), c->lambda, next_id++, Origin::resampled});
            placed = true;
            break;
        }
        if (!placed) out.failed_slots += 1;
    }
    return out;
}

}  // namespace bosh
