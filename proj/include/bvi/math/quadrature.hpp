#pragma once

#include <cmath>
#include <stdexcept>

namespace bvi::math {

namespace detail {

template <class F>
double simpson_step(F&& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson quadrature of f on [a,b] to absolute tolerance tol.
/// The interval is pre-split into panels so narrow features inside a wide
/// window are not missed by the first coarse estimate.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-10, int max_depth = 48,
                 int initial_panels = 24) {
    if (!(a <= b)) throw std::domain_error("integrate: a > b");
    if (a == b) return 0.0;
    double total = 0.0;
    double panel_tol = tol / initial_panels;
    double h = (b - a) / initial_panels;
    for (int k = 0; k < initial_panels; ++k) {
        double lo = a + k * h, hi = (k + 1 == initial_panels) ? b : a + (k + 1) * h;
        double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
        double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, panel_tol, max_depth);
    }
    if (!std::isfinite(total)) throw std::runtime_error("integrate: non-finite result");
    return total;
}

} // namespace bvi::math
