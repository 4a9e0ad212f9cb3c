#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "forward.hpp"
#include "math/quadrature.hpp"
#include "math/rng.hpp"
#include "math/stats.hpp"
#include "wavelet.hpp"

// Random-design Gaussian regression: Y_i = G(theta0)(X_i) + eps_i with
// X_i ~ Uniform(domain) and standard normal noise, plus the information
// distance identities relating KL / Renyi / Hellinger to the L2_lambda
// distance of forward outputs.

namespace bvi {

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::string map_id;
    std::string theta0_id;
    std::size_t n = 0;
};

struct Dataset {
    int dim = 1;
    std::vector<double> x;   // first coordinate
    std::vector<double> x2;  // second coordinate (d = 2 only)
    std::vector<double> y;
    DatasetMeta meta;

    std::size_t size() const { return y.size(); }
};

/// Simulate N observations from theta0. The rng stream is derived from the
/// recorded seed so the metadata regenerates the dataset bit-identically.
inline Dataset simulate(const CoeffTree& theta0, const ForwardMap& map, std::size_t n,
                        std::uint64_t seed, const std::string& theta0_id = "theta0") {
    std::vector<double> g = map.apply(theta0);
    math::Rng rng = math::Rng::substream(seed, {0x5157ULL});
    Dataset ds;
    ds.dim = map.dim();
    ds.meta = {seed, map.id(), theta0_id, n};
    ds.x.reserve(n);
    ds.y.reserve(n);
    if (ds.dim == 2) ds.x2.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = rng.uniform();
        double x2 = (ds.dim == 2) ? rng.uniform() : 0.0;
        double mean = interp_eval(g, map.basis().grid_size(), ds.dim, x, x2);
        ds.x.push_back(x);
        if (ds.dim == 2) ds.x2.push_back(x2);
        ds.y.push_back(mean + rng.normal());
    }
    return ds;
}

/// Gaussian log-likelihood sum_i [-1/2 log(2 pi) - 1/2 (y_i - G(theta)(x_i))^2].
inline double log_likelihood(const std::vector<double>& g_grid, const Dataset& data,
                             std::size_t grid_n) {
    std::vector<double> terms(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        double m = interp_eval(g_grid, grid_n, data.dim, data.x[i],
                               data.dim == 2 ? data.x2[i] : 0.0);
        double r = data.y[i] - m;
        terms[i] = -0.5 * r * r;
    }
    return math::pairwise_sum(terms) -
           0.5 * std::log(2.0 * math::pi) * static_cast<double>(data.size());
}

inline double log_likelihood(const CoeffTree& theta, const Dataset& data, const ForwardMap& map) {
    return log_likelihood(map.apply(theta), data, map.basis().grid_size());
}

struct LikelihoodGrad {
    double value;
    CoeffTree grad;  // d log-likelihood / d coefficients
};

/// Value and reverse-mode gradient in coefficient space (adjoint through the
/// PDE solver and the synthesis map).
inline LikelihoodGrad log_likelihood_grad(const CoeffTree& theta, const Dataset& data,
                                          const ForwardMap& map) {
    ForwardMap::Workspace ws = map.apply_with_workspace(theta);
    std::size_t n = map.basis().grid_size();
    std::vector<double> terms(data.size());
    std::vector<double> gbar(ws.output.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        double xx = data.x[i];
        double yy = data.dim == 2 ? data.x2[i] : 0.0;
        double r = data.y[i] - interp_eval(ws.output, n, data.dim, xx, yy);
        terms[i] = -0.5 * r * r;
        interp_scatter(gbar, n, data.dim, xx, yy, r);
    }
    double value = math::pairwise_sum(terms) -
                   0.5 * std::log(2.0 * math::pi) * static_cast<double>(data.size());
    return {value, map.vjp(theta, ws, gbar)};
}

/// KL identity: D(P_theta1 || P_theta2) = 1/2 ||G(theta1) - G(theta2)||^2_{L2_lambda},
/// evaluated by grid quadrature.
inline double kl_between_laws(const CoeffTree& theta1, const CoeffTree& theta2,
                              const ForwardMap& map) {
    std::vector<double> g1 = map.apply(theta1);
    std::vector<double> g2 = map.apply(theta2);
    for (std::size_t i = 0; i < g1.size(); ++i) g1[i] -= g2[i];
    double nrm = l2_lambda_norm(g1);
    return 0.5 * nrm * nrm;
}

struct McKlEstimate {
    double value;
    double stderr;
};

/// Monte-Carlo estimator of D(P_theta1 || P_theta2): average of
/// log(p_theta1 / p_theta2) over simulated (Y, X) ~ P_theta1.
inline McKlEstimate mc_kl_estimate(const CoeffTree& theta1, const CoeffTree& theta2,
                                   const ForwardMap& map, std::size_t n_mc, math::Rng& rng) {
    std::vector<double> g1 = map.apply(theta1);
    std::vector<double> g2 = map.apply(theta2);
    std::size_t n = map.basis().grid_size();
    std::vector<double> samples(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) {
        double x = rng.uniform();
        double x2 = (map.dim() == 2) ? rng.uniform() : 0.0;
        double m1 = interp_eval(g1, n, map.dim(), x, x2);
        double m2 = interp_eval(g2, n, map.dim(), x, x2);
        double y = m1 + rng.normal();
        samples[i] = 0.5 * (y - m2) * (y - m2) - 0.5 * (y - m1) * (y - m1);
    }
    return {math::mean(samples), math::mc_stderr(samples)};
}

struct HellingerReport {
    double h2;             // squared Hellinger distance by 2-D quadrature
    double d2;             // 2-Renyi divergence by quadrature
    double g_dist2;        // ||G1 - G2||^2_{L2_lambda}
    double c_u;            // (1 - exp(-U^2/2)) / (2 U^2)
    bool sandwich_ok;      // C_U g2 <= h2 <= g2/4
    bool renyi_bound_ok;   // d2 <= exp(4 U^2) g2
};

/// Squared Hellinger distance and 2-Renyi divergence between the joint laws,
/// by quadrature over (x, y), together with the sandwich bounds at level U.
/// The convention h^2 = integral (sqrt(dP1) - sqrt(dP2))^2 (no 1/2 factor) is
/// the one under which the sandwich constants C_U and 1/4 are exact: the
/// lower chord bound gives (1-e^{-U^2/2})/(2U^2) only for the unhalved form,
/// and indeed C_U -> 1/4 as U -> 0 while the halved distance approaches
/// ||dG||^2/8.
inline HellingerReport hellinger_and_renyi_bounds(const CoeffTree& theta1,
                                                  const CoeffTree& theta2,
                                                  const ForwardMap& map, double u_bound) {
    std::vector<double> g1 = map.apply(theta1);
    std::vector<double> g2 = map.apply(theta2);
    double sup = 0.0;
    for (double v : g1) sup = std::max(sup, std::fabs(v));
    for (double v : g2) sup = std::max(sup, std::fabs(v));
    if (u_bound < sup)
        throw std::domain_error("hellinger_and_renyi_bounds: U below observed sup norm");

    const std::size_t pts = g1.size();
    double h2_acc = 0.0, d2_acc = 0.0, gd_acc = 0.0;
    for (std::size_t i = 0; i < pts; ++i) {
        double m1 = g1[i], m2 = g2[i];
        double lo = std::min(m1, m2) - 10.0, hi = std::max(m1, m2) + 10.0;
        auto phi1 = [&](double y) { return std::exp(math::norm_logpdf(y - m1)); };
        auto phi2 = [&](double y) { return std::exp(math::norm_logpdf(y - m2)); };
        double h2x = math::integrate(
            [&](double y) {
                double s = std::sqrt(phi1(y)) - std::sqrt(phi2(y));
                return s * s;
            },
            lo, hi, 1e-12);
        double e2x = math::integrate([&](double y) { return phi1(y) * phi1(y) / phi2(y); },
                                     lo, hi, 1e-12);
        h2_acc += h2x;
        d2_acc += e2x;
        gd_acc += (m1 - m2) * (m1 - m2);
    }
    double npts = static_cast<double>(pts);
    HellingerReport rep;
    rep.h2 = h2_acc / npts;
    rep.d2 = std::log(d2_acc / npts);
    rep.g_dist2 = gd_acc / npts;
    rep.c_u = (1.0 - std::exp(-0.5 * u_bound * u_bound)) / (2.0 * u_bound * u_bound);
    double slack = 1e-9 + 1e-6 * rep.g_dist2;
    rep.sandwich_ok = rep.c_u * rep.g_dist2 <= rep.h2 + slack &&
                      rep.h2 <= 0.25 * rep.g_dist2 + slack;
    rep.renyi_bound_ok = rep.d2 <= std::exp(4.0 * u_bound * u_bound) * rep.g_dist2 + slack;
    return rep;
}

/// Dataset CSV: header x[,x2],y with 17-significant-digit floats.
inline void write_dataset_csv(const Dataset& ds, std::ostream& os) {
    os << (ds.dim == 2 ? "x,x2,y\n" : "x,y\n");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << detail::fmt17(ds.x[i]);
        if (ds.dim == 2) os << ',' << detail::fmt17(ds.x2[i]);
        os << ',' << detail::fmt17(ds.y[i]) << '\n';
    }
}

inline Dataset read_dataset_csv(std::istream& is) {
    Dataset ds;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_dataset_csv: empty input");
    ds.dim = (line == "x,x2,y") ? 2 : 1;
    if (line != "x,y" && line != "x,x2,y")
        throw std::runtime_error("read_dataset_csv: unexpected header: " + line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        double a = 0.0, b = 0.0, c = 0.0;
        if (ds.dim == 2) {
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
                throw std::runtime_error("read_dataset_csv: malformed row");
            ds.x.push_back(a);
            ds.x2.push_back(b);
            ds.y.push_back(c);
        } else {
            if (std::sscanf(line.c_str(), "%lf,%lf", &a, &b) != 2)
                throw std::runtime_error("read_dataset_csv: malformed row");
            ds.x.push_back(a);
            ds.y.push_back(b);
        }
    }
    ds.meta.n = ds.y.size();
    return ds;
}

} // namespace bvi
