#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "darcy.hpp"  // Tridiag

// Time-fractional subdiffusion forward solver for
//   d_t^beta u - u_xx + q u = f   on (0,1) x (0,T],
//   u(0,t) = a0, u(1,t) = a1,  u(x,0) = u0,
// with the Djrbashian-Caputo derivative of order beta in (0,1) discretized by
// the classical L1 scheme on a uniform time grid, implicit in the elliptic
// part. Space is the same cell-centered grid as the Darcy solver.

namespace bvi {

struct SubdiffusionProblem {
    std::size_t n;           // spatial cells
    std::size_t m;           // time steps
    double beta;             // fractional order in (0,1)
    double t_final;          // terminal time T
    std::vector<double> f;   // source (cell-centered), >= l0
    std::vector<double> u0;  // initial data, >= l0
    double a0, a1;           // boundary values, >= l0
    double m0;               // admissible potential bound: 0 <= q < m0
    double l0 = 1e-12;       // positivity floor

    SubdiffusionProblem(std::size_t n_, std::size_t m_, double beta_, double t_final_,
                        std::vector<double> f_, std::vector<double> u0_, double a0_, double a1_,
                        double m0_)
        : n(n_), m(m_), beta(beta_), t_final(t_final_), f(std::move(f_)), u0(std::move(u0_)),
          a0(a0_), a1(a1_), m0(m0_) {
        if (n < 2 || (n & (n - 1)) != 0)
            throw std::domain_error("SubdiffusionProblem: n must be a power of two >= 2");
        if (m < 1) throw std::domain_error("SubdiffusionProblem: need at least one time step");
        if (!(beta > 0.0 && beta < 1.0))
            throw std::domain_error("SubdiffusionProblem: beta must lie in (0,1)");
        if (!(t_final > 0.0)) throw std::domain_error("SubdiffusionProblem: nonpositive time");
        if (!(m0 > 1.0)) throw std::domain_error("SubdiffusionProblem: m0 must exceed 1");
        if (f.size() != n || u0.size() != n)
            throw std::invalid_argument("SubdiffusionProblem: field size mismatch");
        if (!(a0 >= 0.0 && a1 >= 0.0))
            throw std::domain_error("SubdiffusionProblem: boundary values must be >= 0");
        for (double v : f)
            if (!(v >= 0.0)) throw std::domain_error("SubdiffusionProblem: source must be >= 0");
        for (double v : u0)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::domain_error("SubdiffusionProblem: initial data must be >= 0");
    }
};

namespace detail {

inline void check_potential(const SubdiffusionProblem& prob, const std::vector<double>& q) {
    if (q.size() != prob.n)
        throw std::invalid_argument("solve_subdiffusion: potential size mismatch");
    for (double v : q)
        if (!(v >= 0.0 && v < prob.m0))
            throw std::domain_error("solve_subdiffusion: potential outside [0, m0)");
}

/// Implicit operator mu*I - Laplacian + diag(q) on the cell-centered grid.
inline Tridiag assemble_subdiffusion(const SubdiffusionProblem& prob,
                                     const std::vector<double>& q, double mu) {
    std::size_t n = prob.n;
    double h = 1.0 / static_cast<double>(n);
    double ih2 = 1.0 / (h * h);
    Tridiag t;
    t.lower.assign(n, 0.0);
    t.diag.assign(n, 0.0);
    t.upper.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        t.diag[i] += ih2;
        t.diag[i + 1] += ih2;
        t.upper[i] = -ih2;
        t.lower[i + 1] = -ih2;
    }
    t.diag[0] += 2.0 * ih2;
    t.diag[n - 1] += 2.0 * ih2;
    for (std::size_t i = 0; i < n; ++i) t.diag[i] += mu + q[i];
    return t;
}

} // namespace detail

struct SubdiffusionTrace {
    std::vector<std::vector<double>> u;  // u[k], k = 0..m (u[0] = initial data)
    double mu;                           // tau^{-beta} / Gamma(2-beta)
    std::vector<double> a;               // L1 weights a_j = (j+1)^{1-beta} - j^{1-beta}
};

/// March the L1 scheme and keep the whole trajectory (needed by the adjoint).
inline SubdiffusionTrace solve_subdiffusion_trace(const SubdiffusionProblem& prob,
                                                  const std::vector<double>& q) {
    detail::check_potential(prob, q);
    std::size_t n = prob.n, m = prob.m;
    double tau = prob.t_final / static_cast<double>(m);
    if (!(tau > 0.0)) throw std::domain_error("solve_subdiffusion: nonpositive time step");
    double mu = std::pow(tau, -prob.beta) / std::tgamma(2.0 - prob.beta);

    SubdiffusionTrace tr;
    tr.mu = mu;
    tr.a.resize(m);
    for (std::size_t j = 0; j < m; ++j)
        tr.a[j] = std::pow(static_cast<double>(j + 1), 1.0 - prob.beta) -
                  std::pow(static_cast<double>(j), 1.0 - prob.beta);

    double ih2 = static_cast<double>(n) * static_cast<double>(n);
    std::vector<double> base_rhs = prob.f;
    base_rhs[0] += 2.0 * prob.a0 * ih2;
    base_rhs[n - 1] += 2.0 * prob.a1 * ih2;

    detail::Tridiag B = detail::assemble_subdiffusion(prob, q, mu);
    tr.u.reserve(m + 1);
    tr.u.push_back(prob.u0);
    std::vector<std::vector<double>> diffs;  // u^j - u^{j-1}
    for (std::size_t k = 1; k <= m; ++k) {
        std::vector<double> rhs = base_rhs;
        const std::vector<double>& prev = tr.u[k - 1];
        for (std::size_t i = 0; i < n; ++i) rhs[i] += mu * prev[i];
        for (std::size_t j = 1; j < k; ++j) {
            double w = mu * tr.a[k - j];
            const std::vector<double>& d = diffs[j - 1];
            for (std::size_t i = 0; i < n; ++i) rhs[i] -= w * d[i];
        }
        std::vector<double> u = B.solve(rhs);
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = u[i] - prev[i];
        diffs.push_back(std::move(d));
        tr.u.push_back(std::move(u));
    }
    return tr;
}

/// Terminal slice u(., T).
inline std::vector<double> solve_subdiffusion(const SubdiffusionProblem& prob,
                                              const std::vector<double>& q) {
    return solve_subdiffusion_trace(prob, q).u.back();
}

/// Discrete adjoint of the L1 scheme: given v = dL/du(., T), returns dL/dq.
inline std::vector<double> subdiffusion_vjp(const SubdiffusionProblem& prob,
                                            const std::vector<double>& q,
                                            const SubdiffusionTrace& tr,
                                            const std::vector<double>& v) {
    std::size_t n = prob.n, m = prob.m;
    detail::Tridiag B = detail::assemble_subdiffusion(prob, q, tr.mu);

    // Coefficient of u^j in the RHS of step k (j < k).
    auto c = [&](std::size_t k, std::size_t j) -> double {
        if (k == 1) return tr.mu;  // j == 0
        if (j == k - 1) return tr.mu * (1.0 - tr.a[1]);
        if (j == 0) return tr.mu * tr.a[k - 1];
        return tr.mu * (tr.a[k - 1 - j] - tr.a[k - j]);
    };

    std::vector<std::vector<double>> lambda(m + 1);
    lambda[m] = B.solve(v);
    for (std::size_t k = m; k-- > 1;) {
        std::vector<double> rhs(n, 0.0);
        for (std::size_t kp = k + 1; kp <= m; ++kp) {
            double w = c(kp, k);
            for (std::size_t i = 0; i < n; ++i) rhs[i] += w * lambda[kp][i];
        }
        lambda[k] = B.solve(rhs);
    }

    std::vector<double> grad(n, 0.0);
    for (std::size_t k = 1; k <= m; ++k)
        for (std::size_t i = 0; i < n; ++i) grad[i] -= lambda[k][i] * tr.u[k][i];
    return grad;
}

} // namespace bvi
