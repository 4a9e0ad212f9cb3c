#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

// Darcy flow forward solver: div(f grad u) = g with homogeneous Dirichlet
// boundary, discretized by a conservative cell-centered finite-volume scheme
// with harmonic averaging of f at interior faces and half-cell Dirichlet
// fluxes at the walls. Direct solves (Thomas in 1-D, sparse LDLT in 2-D).

namespace bvi {

struct DarcyProblem {
    int d;                  // 1 or 2
    std::size_t n;          // cells per axis (power of two, matches the wavelet grid)
    std::vector<double> g;  // source, cell-centered (n or n*n values)
    double k_min = 0.0;     // ellipticity floor

    DarcyProblem(int d_, std::size_t n_, std::vector<double> g_, double k_min_ = 0.0)
        : d(d_), n(n_), g(std::move(g_)), k_min(k_min_) {
        if (d != 1 && d != 2) throw std::domain_error("DarcyProblem: d must be 1 or 2");
        if (n < 2 || (n & (n - 1)) != 0)
            throw std::domain_error("DarcyProblem: n must be a power of two >= 2");
        std::size_t pts = (d == 1) ? n : n * n;
        if (g.size() != pts) throw std::invalid_argument("DarcyProblem: source size mismatch");
        for (double v : g)
            if (!std::isfinite(v)) throw std::domain_error("DarcyProblem: source not finite");
    }

    std::size_t cells() const { return d == 1 ? n : n * n; }
};

namespace detail {

inline void check_ellipticity(const DarcyProblem& prob, const std::vector<double>& f) {
    if (f.size() != prob.cells())
        throw std::invalid_argument("solve_darcy: coefficient size mismatch");
    const double margin = prob.k_min + 1e-8;
    for (double v : f)
        if (!(v >= margin))
            throw std::runtime_error("solve_darcy: coefficient violates ellipticity margin");
}

inline double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

/// Tridiagonal solve (Thomas). diag/lower/upper are overwritten.
inline std::vector<double> thomas_solve(std::vector<double> lower, std::vector<double> diag,
                                        std::vector<double> upper, std::vector<double> rhs) {
    std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

struct Tridiag {
    std::vector<double> lower, diag, upper;
    std::vector<double> solve(std::vector<double> rhs) const {
        return thomas_solve(lower, diag, upper, std::move(rhs));
    }
    double residual_inf(const std::vector<double>& x, const std::vector<double>& rhs) const {
        double r = 0.0;
        std::size_t n = diag.size();
        for (std::size_t i = 0; i < n; ++i) {
            double ax = diag[i] * x[i];
            if (i > 0) ax += lower[i] * x[i - 1];
            if (i + 1 < n) ax += upper[i] * x[i + 1];
            r = std::max(r, std::fabs(ax - rhs[i]));
        }
        return r;
    }
};

/// Assemble the 1-D operator -d/dx(f du/dx) on cell centers with u = 0 walls.
inline Tridiag assemble_darcy_1d(const std::vector<double>& f) {
    std::size_t n = f.size();
    double h = 1.0 / static_cast<double>(n);
    double ih2 = 1.0 / (h * h);
    Tridiag t;
    t.lower.assign(n, 0.0);
    t.diag.assign(n, 0.0);
    t.upper.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double face = harmonic(f[i], f[i + 1]) * ih2;
        t.diag[i] += face;
        t.diag[i + 1] += face;
        t.upper[i] = -face;
        t.lower[i + 1] = -face;
    }
    t.diag[0] += 2.0 * f[0] * ih2;          // wall at x=0, distance h/2
    t.diag[n - 1] += 2.0 * f[n - 1] * ih2;  // wall at x=1
    return t;
}

inline Eigen::SparseMatrix<double> assemble_darcy_2d(const std::vector<double>& f,
                                                     std::size_t n) {
    double h = 1.0 / static_cast<double>(n);
    double ih2 = 1.0 / (h * h);
    auto idx = [n](std::size_t iy, std::size_t ix) {
        return static_cast<Eigen::Index>(iy * n + ix);
    };
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(5 * n * n);
    std::vector<double> diag(n * n, 0.0);
    for (std::size_t iy = 0; iy < n; ++iy) {
        for (std::size_t ix = 0; ix < n; ++ix) {
            std::size_t c = iy * n + ix;
            if (ix + 1 < n) {
                double face = harmonic(f[c], f[c + 1]) * ih2;
                diag[c] += face;
                diag[c + 1] += face;
                trips.emplace_back(idx(iy, ix), idx(iy, ix + 1), -face);
                trips.emplace_back(idx(iy, ix + 1), idx(iy, ix), -face);
            }
            if (iy + 1 < n) {
                double face = harmonic(f[c], f[c + n]) * ih2;
                diag[c] += face;
                diag[c + n] += face;
                trips.emplace_back(idx(iy, ix), idx(iy + 1, ix), -face);
                trips.emplace_back(idx(iy + 1, ix), idx(iy, ix), -face);
            }
            if (ix == 0 || ix + 1 == n) diag[c] += 2.0 * f[c] * ih2;
            if (iy == 0 || iy + 1 == n) diag[c] += 2.0 * f[c] * ih2;
        }
    }
    for (std::size_t c = 0; c < n * n; ++c)
        trips.emplace_back(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c), diag[c]);
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n * n),
                                  static_cast<Eigen::Index>(n * n));
    A.setFromTriplets(trips.begin(), trips.end());
    return A;
}

} // namespace detail

/// Solve div(f grad u) = g, u = 0 on the boundary. Returns u on cell centers.
inline std::vector<double> solve_darcy(const DarcyProblem& prob, const std::vector<double>& f) {
    detail::check_ellipticity(prob, f);
    std::size_t cells = prob.cells();
    std::vector<double> rhs(cells);
    for (std::size_t i = 0; i < cells; ++i) rhs[i] = -prob.g[i];  // A = -div(f grad .)

    if (prob.d == 1) {
        detail::Tridiag A = detail::assemble_darcy_1d(f);
        std::vector<double> u = A.solve(rhs);
        if (A.residual_inf(u, rhs) > 1e-10 * (1.0 + std::fabs(rhs[0])))
            throw std::runtime_error("solve_darcy: direct solve residual too large");
        return u;
    }
    Eigen::SparseMatrix<double> A = detail::assemble_darcy_2d(f, prob.n);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("solve_darcy: factorization failed (conditioning)");
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(cells));
    Eigen::VectorXd u = solver.solve(b);
    double res = (A * u - b).cwiseAbs().maxCoeff();
    if (!(res <= 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())))
        throw std::runtime_error("solve_darcy: direct solve residual too large");
    return std::vector<double>(u.data(), u.data() + cells);
}

/// Reverse-mode derivative: given the solution u and a seed v = dL/du,
/// returns dL/df. One extra solve with the same operator.
inline std::vector<double> darcy_vjp(const DarcyProblem& prob, const std::vector<double>& f,
                                     const std::vector<double>& u, const std::vector<double>& v) {
    detail::check_ellipticity(prob, f);
    std::size_t cells = prob.cells();
    double h = 1.0 / static_cast<double>(prob.n);
    double ih2 = 1.0 / (h * h);
    std::vector<double> lambda;
    if (prob.d == 1) {
        lambda = detail::assemble_darcy_1d(f).solve(v);
    } else {
        Eigen::SparseMatrix<double> A = detail::assemble_darcy_2d(f, prob.n);
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
        Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(cells));
        Eigen::VectorXd lam = solver.solve(vv);
        lambda.assign(lam.data(), lam.data() + cells);
    }

    // dL/df_j = -lambda^T (dA/df_j) u, accumulated face by face.
    std::vector<double> grad(cells, 0.0);
    auto face_accum = [&](std::size_t a, std::size_t b) {
        double s = (lambda[a] - lambda[b]) * (u[a] - u[b]) * ih2;
        double denom = (f[a] + f[b]) * (f[a] + f[b]);
        grad[a] -= s * 2.0 * f[b] * f[b] / denom;
        grad[b] -= s * 2.0 * f[a] * f[a] / denom;
    };
    if (prob.d == 1) {
        for (std::size_t i = 0; i + 1 < prob.n; ++i) face_accum(i, i + 1);
        grad[0] -= lambda[0] * u[0] * 2.0 * ih2;
        grad[prob.n - 1] -= lambda[prob.n - 1] * u[prob.n - 1] * 2.0 * ih2;
    } else {
        std::size_t n = prob.n;
        for (std::size_t iy = 0; iy < n; ++iy)
            for (std::size_t ix = 0; ix < n; ++ix) {
                std::size_t c = iy * n + ix;
                if (ix + 1 < n) face_accum(c, c + 1);
                if (iy + 1 < n) face_accum(c, c + n);
                if (ix == 0 || ix + 1 == n) grad[c] -= lambda[c] * u[c] * 2.0 * ih2;
                if (iy == 0 || iy + 1 == n) grad[c] -= lambda[c] * u[c] * 2.0 * ih2;
            }
    }
    return grad;
}

} // namespace bvi
