#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace bosh {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const Vec& a) { return dot(a, a); }

inline double norm(const Vec& a) { return std::sqrt(squared_norm(a)); }

inline bool all_finite(const Vec& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

// a + s * b
inline Vec add_scaled(const Vec& a, double s, const Vec& b) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
    return out;
}

inline double squared_distance(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Throws if the input has zero length or non-finite entries.
inline Vec normalized(const Vec& u) {
    if (u.empty() || !all_finite(u))
        throw std::invalid_argument("direction must be non-empty and finite");
    double n = norm(u);
    if (!(n > 0.0) || !std::isfinite(n))
        throw std::invalid_argument("direction must have positive norm");
    Vec out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] / n;
    return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Decorrelated seed for a named sub-stream of a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

inline Vec gaussian_vec(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec v(static_cast<std::size_t>(d));
    for (auto& x : v) x = n01(rng);
    return v;
}

// Uniform on the unit sphere (normalized Gaussian); redraws the zero vector.
inline Vec unit_gaussian_vec(std::mt19937_64& rng, int d) {
    for (;;) {
        Vec v = gaussian_vec(rng, d);
        double n = norm(v);
        if (n > 0.0) {
            for (auto& x : v) x /= n;
            return v;
        }
    }
}

// Direction from uniform cube samples, normalized; redraws the zero vector.
inline Vec unit_uniform_vec(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        Vec v(static_cast<std::size_t>(d));
        for (auto& x : v) x = u(rng);
        double n = norm(v);
        if (n > 0.0) {
            for (auto& x : v) x /= n;
            return v;
        }
    }
}

}  // namespace bosh
