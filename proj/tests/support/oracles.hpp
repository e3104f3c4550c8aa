#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the library code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

struct Hit {
    std::size_t index;
    double distance;
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

/// O(n^2) all-pairs full sort: every pool member except the query, ordered by
/// (distance, index), truncated to k.
template <typename RowFn, typename DistFn>
std::vector<Hit> brute_force_knn(RowFn row, std::size_t query, std::span<const std::size_t> pool, std::size_t k,
                                 DistFn dist) {
    std::vector<Hit> all;
    for (auto p : pool)
        if (p != query) all.push_back({p, dist(row(query), row(p))});
    std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

/// Central finite difference of a scalar function of one parameter slot.
inline double central_difference(const std::function<double()>& loss, double& parameter, double eps = 1e-5) {
    const double saved = parameter;
    parameter = saved + eps;
    const double up = loss();
    parameter = saved - eps;
    const double down = loss();
    parameter = saved;
    return (up - down) / (2.0 * eps);
}

/// Monte-Carlo estimate of KL(N(mu, diag(exp(log_var))) || N(0, I)) from
/// `draws` samples of the posterior.
inline double monte_carlo_kl(const std::vector<double>& mu, const std::vector<double>& log_var, std::size_t draws,
                             std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double total = 0.0;
    for (std::size_t s = 0; s < draws; ++s) {
        double log_ratio = 0.0;
        for (std::size_t j = 0; j < mu.size(); ++j) {
            const double sigma = std::exp(0.5 * log_var[j]);
            const double eps = normal(gen);
            const double z = mu[j] + sigma * eps;
            // log q(z) - log p(z); the 2*pi terms cancel.
            log_ratio += -0.5 * eps * eps - 0.5 * log_var[j] + 0.5 * z * z;
        }
        total += log_ratio;
    }
    return total / static_cast<double>(draws);
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < order.size();) {
            std::size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
