#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "besov.hpp"
#include "darcy.hpp"
#include "link.hpp"
#include "math/stats.hpp"
#include "subdiffusion.hpp"
#include "wavelet.hpp"

// The reparametrized forward map G(theta) = G(Phi(theta)): synthesize the
// coefficient tree, apply the cutoff and link pointwise, run the PDE solver,
// return the prediction on the dyadic grid. A linear toy map (plain synthesis)
// is included for conjugate tests.

namespace bvi {

enum class ProblemKind { linear_toy, darcy, subdiffusion };

/// Uniform-design L2 norm of a grid function (midpoint quadrature).
inline double l2_lambda_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

/// Linear (d=1) / bilinear (d=2) interpolation of cell-centered values at a
/// domain point; clamped flat within the boundary half-cells.
inline double interp_eval(std::span<const double> values, std::size_t n, int dim, double x,
                          double y = 0.0) {
    auto locate = [n](double t, std::size_t& i0, double& w) {
        double p = t * static_cast<double>(n) - 0.5;
        if (p <= 0.0) { i0 = 0; w = 0.0; return; }
        if (p >= static_cast<double>(n - 1)) { i0 = n - 2; w = 1.0; return; }
        i0 = static_cast<std::size_t>(p);
        w = p - static_cast<double>(i0);
    };
    std::size_t ix;
    double wx;
    locate(x, ix, wx);
    if (dim == 1) return (1.0 - wx) * values[ix] + wx * values[ix + 1];
    std::size_t iy;
    double wy;
    locate(y, iy, wy);
    return (1.0 - wy) * ((1.0 - wx) * values[iy * n + ix] + wx * values[iy * n + ix + 1]) +
           wy * ((1.0 - wx) * values[(iy + 1) * n + ix] + wx * values[(iy + 1) * n + ix + 1]);
}

/// Adjoint of interp_eval: scatter a weight onto the grid.
inline void interp_scatter(std::span<double> acc, std::size_t n, int dim, double x, double y,
                           double weight) {
    auto locate = [n](double t, std::size_t& i0, double& w) {
        double p = t * static_cast<double>(n) - 0.5;
        if (p <= 0.0) { i0 = 0; w = 0.0; return; }
        if (p >= static_cast<double>(n - 1)) { i0 = n - 2; w = 1.0; return; }
        i0 = static_cast<std::size_t>(p);
        w = p - static_cast<double>(i0);
    };
    std::size_t ix;
    double wx;
    locate(x, ix, wx);
    if (dim == 1) {
        acc[ix] += (1.0 - wx) * weight;
        acc[ix + 1] += wx * weight;
        return;
    }
    std::size_t iy;
    double wy;
    locate(y, iy, wy);
    acc[iy * n + ix] += (1.0 - wy) * (1.0 - wx) * weight;
    acc[iy * n + ix + 1] += (1.0 - wy) * wx * weight;
    acc[(iy + 1) * n + ix] += wy * (1.0 - wx) * weight;
    acc[(iy + 1) * n + ix + 1] += wy * wx * weight;
}

class ForwardMap {
public:
    static ForwardMap linear_toy(const WaveletBasis& basis) {
        return ForwardMap(ProblemKind::linear_toy, basis, {}, {}, {});
    }
    static ForwardMap darcy(const WaveletBasis& basis, DarcyProblem prob, LinkFunction link) {
        if (prob.d != basis.dim() || prob.n != basis.grid_size())
            throw std::invalid_argument("ForwardMap: Darcy grid does not match basis");
        return ForwardMap(ProblemKind::darcy, basis, std::move(prob), {}, link);
    }
    static ForwardMap subdiffusion(const WaveletBasis& basis, SubdiffusionProblem prob,
                                   LinkFunction link) {
        if (basis.dim() != 1 || prob.n != basis.grid_size())
            throw std::invalid_argument("ForwardMap: subdiffusion grid does not match basis");
        return ForwardMap(ProblemKind::subdiffusion, basis, {}, std::move(prob), link);
    }

    ProblemKind kind() const { return kind_; }
    const WaveletBasis& basis() const { return basis_; }
    int dim() const { return basis_.dim(); }
    std::size_t grid_points() const { return basis_.grid_points(); }
    const LinkFunction& link() const {
        if (kind_ == ProblemKind::linear_toy)
            throw std::logic_error("ForwardMap: toy map has no link");
        return link_;
    }

    /// Forward smoothing degree used by default in rescalings and probes.
    double default_kappa() const {
        switch (kind_) {
            case ProblemKind::darcy: return 1.0;
            case ProblemKind::subdiffusion: return 2.0;
            default: return 0.0;
        }
    }

    std::string id() const {
        switch (kind_) {
            case ProblemKind::darcy: return std::string("darcy-") + family_name(basis_.family());
            case ProblemKind::subdiffusion:
                return std::string("subdiffusion-") + family_name(basis_.family());
            default: return std::string("linear-toy-") + family_name(basis_.family());
        }
    }

    /// theta as a grid function: cutoff * synthesis (toy: plain synthesis).
    std::vector<double> parameter_field(const CoeffTree& theta) const {
        std::vector<double> field = synthesize(theta);
        if (kind_ != ProblemKind::linear_toy)
            for (std::size_t i = 0; i < field.size(); ++i) field[i] *= chi_[i];
        return field;
    }

    struct Workspace {
        std::vector<double> output;      // G(theta) on the grid
        std::vector<double> field;       // cutoff * synthesis
        std::vector<double> pde_coeff;   // Phi(field)
        std::optional<SubdiffusionTrace> trace;
    };

    std::vector<double> apply(const CoeffTree& theta) const {
        return apply_with_workspace(theta).output;
    }

    Workspace apply_with_workspace(const CoeffTree& theta) const {
        if (!(theta.basis == basis_))
            throw std::invalid_argument("ForwardMap: coefficient tree from a different basis");
        Workspace ws;
        ws.field = parameter_field(theta);
        switch (kind_) {
            case ProblemKind::linear_toy:
                ws.output = ws.field;
                break;
            case ProblemKind::darcy:
                ws.pde_coeff = link_.apply(ws.field);
                ws.output = solve_darcy(*darcy_, ws.pde_coeff);
                break;
            case ProblemKind::subdiffusion: {
                ws.pde_coeff = link_.apply(ws.field);
                ws.trace = solve_subdiffusion_trace(*subdiffusion_, ws.pde_coeff);
                ws.output = ws.trace->u.back();
                break;
            }
        }
        return ws;
    }

    /// Reverse-mode derivative: dL/dcoefficients from a seed gbar = dL/doutput.
    CoeffTree vjp(const CoeffTree& theta, const Workspace& ws,
                  std::span<const double> gbar) const {
        std::vector<double> gfield;
        switch (kind_) {
            case ProblemKind::linear_toy:
                gfield.assign(gbar.begin(), gbar.end());
                break;
            case ProblemKind::darcy: {
                std::vector<double> v(gbar.begin(), gbar.end());
                std::vector<double> gf = darcy_vjp(*darcy_, ws.pde_coeff, ws.output, v);
                gfield = chain_link(ws.field, gf);
                break;
            }
            case ProblemKind::subdiffusion: {
                std::vector<double> v(gbar.begin(), gbar.end());
                std::vector<double> gq = subdiffusion_vjp(*subdiffusion_, ws.pde_coeff,
                                                          *ws.trace, v);
                gfield = chain_link(ws.field, gq);
                break;
            }
        }
        if (kind_ != ProblemKind::linear_toy)
            for (std::size_t i = 0; i < gfield.size(); ++i) gfield[i] *= chi_[i];
        // Adjoint of the synthesis map under the unitary-grid convention.
        CoeffTree grad = analyze(gfield, basis_);
        double scale = std::pow(static_cast<double>(basis_.grid_size()),
                                static_cast<double>(basis_.dim()));
        for (double& v : grad.values) v *= scale;
        (void)theta;
        return grad;
    }

    const DarcyProblem& darcy_problem() const { return *darcy_; }
    const SubdiffusionProblem& subdiffusion_problem() const { return *subdiffusion_; }

private:
    ForwardMap(ProblemKind kind, const WaveletBasis& basis, std::optional<DarcyProblem> dp,
               std::optional<SubdiffusionProblem> sp, std::optional<LinkFunction> link)
        : kind_(kind), basis_(basis), darcy_(std::move(dp)), subdiffusion_(std::move(sp)) {
        if (link) link_ = *link;
        if (kind_ != ProblemKind::linear_toy) {
            const std::size_t n = basis_.grid_size();
            chi_.resize(basis_.grid_points());
            if (basis_.dim() == 1) {
                for (std::size_t i = 0; i < n; ++i)
                    chi_[i] = cutoff_profile(basis_.coordinate(i));
            } else {
                for (std::size_t iy = 0; iy < n; ++iy)
                    for (std::size_t ix = 0; ix < n; ++ix)
                        chi_[iy * n + ix] = cutoff_profile(basis_.coordinate(iy)) *
                                            cutoff_profile(basis_.coordinate(ix));
            }
        }
    }

    std::vector<double> chain_link(const std::vector<double>& field,
                                   const std::vector<double>& gcoeff) const {
        std::vector<double> out(field.size());
        for (std::size_t i = 0; i < field.size(); ++i)
            out[i] = gcoeff[i] * link_.derivative(field[i]);
        return out;
    }

    ProblemKind kind_;
    WaveletBasis basis_;
    std::optional<DarcyProblem> darcy_;
    std::optional<SubdiffusionProblem> subdiffusion_;
    LinkFunction link_{LinkFunction::Kind::darcy_softplus, 0.0, 2.0};
    std::vector<double> chi_;
};

struct ConditionProbeReport {
    std::vector<double> g_dist;      // ||G(theta1) - G(theta2)||_{L2_lambda}
    std::vector<double> dual_dist;   // ||theta1 - theta2||_{(H^kappa)*}
    std::vector<double> f_dist;      // ||f_theta1 - f_theta2||_{L2}
    std::vector<double> besov_max;   // max of the pair's Besov norms
    double max_ratio = 0.0;          // empirical lower bound on C_L (1 + M^l)
    double median_ratio = 0.0;
    double lipschitz_power = 0.0;    // OLS slope of log ratio on log(1 + M)
    double stability_power = 0.0;    // OLS slope of log f_dist on log g_dist
    double spearman = 0.0;           // rank association of the stability scatter
};

/// Empirical probe of the regularity/stability conditions: Lipschitz ratios in
/// the dual norm and the stability scatter over prior pairs.
inline ConditionProbeReport probe_conditions(const ForwardMap& map, const BesovPrior& prior,
                                             std::size_t n_pairs, double kappa,
                                             math::Rng& rng) {
    if (n_pairs < 10) throw std::domain_error("probe_conditions: need at least 10 pairs");
    double b_smooth = std::max(prior.spec().alpha - static_cast<double>(prior.spec().d) /
                                                        prior.spec().p - 0.5,
                               0.0);
    ConditionProbeReport rep;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        PriorDraw d1 = prior.sample(rng);
        PriorDraw d2 = prior.sample(rng);
        std::vector<double> g1 = map.apply(d1.coeffs);
        std::vector<double> g2 = map.apply(d2.coeffs);
        CoeffTree diff = d1.coeffs;
        for (std::size_t j = 0; j < diff.values.size(); ++j)
            diff.values[j] -= d2.coeffs.values[j];
        std::vector<double> gd(g1.size());
        for (std::size_t j = 0; j < g1.size(); ++j) gd[j] = g1[j] - g2[j];
        rep.g_dist.push_back(l2_lambda_norm(gd));
        rep.dual_dist.push_back(sobolev_dual_norm(diff, kappa));
        rep.besov_max.push_back(std::max(besov_norm(d1.coeffs, b_smooth, prior.spec().p),
                                         besov_norm(d2.coeffs, b_smooth, prior.spec().p)));
        if (map.kind() == ProblemKind::linear_toy) {
            rep.f_dist.push_back(rep.g_dist.back());  // identity map: f = G(theta)
        } else {
            std::vector<double> f1 = map.link().apply(map.parameter_field(d1.coeffs));
            std::vector<double> f2 = map.link().apply(map.parameter_field(d2.coeffs));
            std::vector<double> fd(f1.size());
            for (std::size_t j = 0; j < f1.size(); ++j) fd[j] = f1[j] - f2[j];
            rep.f_dist.push_back(l2_lambda_norm(fd));
        }
    }
    std::vector<double> ratios, log_ratio, log_m, log_f, log_g;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        if (rep.dual_dist[i] > 0.0 && rep.g_dist[i] > 0.0) {
            double r = rep.g_dist[i] / rep.dual_dist[i];
            ratios.push_back(r);
            log_ratio.push_back(std::log(r));
            log_m.push_back(std::log(1.0 + rep.besov_max[i]));
        }
        if (rep.g_dist[i] > 0.0 && rep.f_dist[i] > 0.0) {
            log_g.push_back(std::log(rep.g_dist[i]));
            log_f.push_back(std::log(rep.f_dist[i]));
        }
    }
    if (!ratios.empty()) {
        rep.max_ratio = *std::max_element(ratios.begin(), ratios.end());
        rep.median_ratio = math::median(ratios);
    }
    if (log_ratio.size() >= 3) rep.lipschitz_power = math::ols(log_m, log_ratio).slope;
    if (log_f.size() >= 3) {
        rep.stability_power = math::ols(log_g, log_f).slope;
        rep.spearman = math::spearman_rho(log_g, log_f);
    }
    return rep;
}

} // namespace bvi
