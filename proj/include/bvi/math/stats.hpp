#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "special.hpp"

namespace bvi::math {

/// Pairwise (cascade) summation: deterministic regardless of how callers
/// partition work, and accurate for long sums.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::domain_error("mean: empty range");
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::domain_error("variance: need at least two points");
    double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

/// Standard error of the sample mean.
inline double mc_stderr(std::span<const double> xs) {
    return stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw std::domain_error("median: empty range");
    std::sort(xs.begin(), xs.end());
    std::size_t n = xs.size();
    return (n % 2 == 1) ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r_squared = 0.0;
    double slope_ci_halfwidth = 0.0; // 95%, Student-t with n-2 dof
};

/// Ordinary least squares y = intercept + slope*x.
inline LineFit ols(std::span<const double> x, std::span<const double> y) {
    std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::domain_error("ols: need matched n >= 2");
    double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::domain_error("ols: degenerate x");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r_squared = (syy > 0.0) ? 1.0 - ss_res / syy : 1.0;
    if (n > 2) {
        double s2 = ss_res / static_cast<double>(n - 2);
        fit.slope_stderr = std::sqrt(s2 / sxx);
        fit.slope_ci_halfwidth =
            student_t_quantile(0.975, static_cast<double>(n - 2)) * fit.slope_stderr;
    }
    return fit;
}

inline std::vector<double> ranks(std::span<const double> xs) {
    std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0; // ties get the average rank
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Spearman rank correlation.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::domain_error("spearman_rho: need matched n >= 2");
    auto rx = ranks(x), ry = ranks(y);
    double mx = mean(rx), my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace bvi::math
