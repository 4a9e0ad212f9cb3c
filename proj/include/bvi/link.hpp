#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

// Link functions Phi mapping unconstrained parameter fields to admissible PDE
// coefficients. Both kinds are smooth, strictly increasing bijections with
// Phi(0) = 1 and bounded derivatives.

namespace bvi {

struct LinkFunction {
    enum class Kind { darcy_softplus, logistic };

    Kind kind;
    double k_min = 0.0;  // darcy_softplus: range (k_min, inf), k_min in [0,1)
    double m0 = 2.0;     // logistic: range (0, m0), m0 > 1

    static LinkFunction darcy(double k_min) {
        if (!(k_min >= 0.0 && k_min < 1.0))
            throw std::domain_error("LinkFunction: k_min must lie in [0,1)");
        return {Kind::darcy_softplus, k_min, 0.0};
    }
    static LinkFunction logistic(double m0) {
        if (!(m0 > 1.0)) throw std::domain_error("LinkFunction: m0 must exceed 1");
        return {Kind::logistic, 0.0, m0};
    }

    double operator()(double t) const {
        if (kind == Kind::darcy_softplus) {
            const double ln2 = std::log(2.0);
            double u = t * ln2;
            double sp = (u > 30.0) ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
            return k_min + (1.0 - k_min) * sp / ln2;
        }
        // Phi(t) = M0 / (1 + (M0-1) e^{-t})
        if (t >= 0.0) return m0 / (1.0 + (m0 - 1.0) * std::exp(-t));
        double et = std::exp(t);
        return m0 * et / (et + (m0 - 1.0));
    }

    double derivative(double t) const {
        if (kind == Kind::darcy_softplus) {
            const double ln2 = std::log(2.0);
            double u = t * ln2;
            double sig = (u >= 0.0) ? 1.0 / (1.0 + std::exp(-u))
                                    : std::exp(u) / (1.0 + std::exp(u));
            return (1.0 - k_min) * sig;
        }
        double phi = (*this)(t);
        return phi * (1.0 - phi / m0);
    }

    double inverse(double f) const {
        if (kind == Kind::darcy_softplus) {
            if (!(f > k_min)) throw std::domain_error("LinkFunction: value below range");
            const double ln2 = std::log(2.0);
            double v = (f - k_min) / (1.0 - k_min) * ln2;
            // invert softplus: u = log(e^v - 1)
            double u = (v > 30.0) ? v + std::log1p(-std::exp(-v)) : std::log(std::expm1(v));
            return u / ln2;
        }
        if (!(f > 0.0 && f < m0)) throw std::domain_error("LinkFunction: value outside range");
        return std::log((m0 - 1.0) * f / (m0 - f));
    }

    std::vector<double> apply(const std::vector<double>& theta) const {
        std::vector<double> out(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) out[i] = (*this)(theta[i]);
        return out;
    }

    std::vector<double> apply_inverse(const std::vector<double>& f) const {
        std::vector<double> out(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = inverse(f[i]);
        return out;
    }

    std::string name() const {
        return kind == Kind::darcy_softplus ? "darcy-softplus" : "logistic";
    }
};

} // namespace bvi
