#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "math/rng.hpp"
#include "math/stats.hpp"
#include "pexp.hpp"
#include "wavelet.hpp"

// Besov priors: random wavelet series with i.i.d. p-exponential weights
// scaled per level by 2^{l(d/p - d/2 - alpha)}, multiplied by a fixed smooth
// cutoff chi, optionally truncated at level J, with the N-dependent rescaling
// rho = (N eps_N^2)^{-1/p}.

namespace bvi {

/// Smooth compactly supported bump: 1 on [0.25, 0.75], 0 outside [0.1, 0.9],
/// glued with the exp(-1/t) mollifier. Fields are multiplied pointwise by the
/// tensor product of this profile.
inline double cutoff_profile(double x) {
    auto h = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
    auto ramp = [&](double t) {  // 0 -> 1 smoothly on [0,1]
        double num = h(t);
        return num / (num + h(1.0 - t));
    };
    if (x <= 0.1 || x >= 0.9) return 0.0;
    if (x >= 0.25 && x <= 0.75) return 1.0;
    if (x < 0.25) return ramp((x - 0.1) / 0.15);
    return ramp((0.9 - x) / 0.15);
}

struct BesovPriorSpec {
    double p;      // coefficient exponent, >= 1
    double alpha;  // regularity, > d/p
    int d;         // dimension, 1 or 2
    double rho;    // scaling constant (1 for the centred prior Pi')
    std::optional<int> truncation;  // level J; nullopt = up to basis resolution

    BesovPriorSpec(double p_, double alpha_, int d_, double rho_ = 1.0,
                   std::optional<int> truncation_ = std::nullopt)
        : p(p_), alpha(alpha_), d(d_), rho(rho_), truncation(truncation_) {
        if (!(p >= 1.0)) throw std::domain_error("BesovPriorSpec: p must be >= 1");
        if (!(alpha > static_cast<double>(d) / p))
            throw std::domain_error("BesovPriorSpec: alpha must exceed d/p");
        if (!(rho >= 0.0)) throw std::domain_error("BesovPriorSpec: rho must be >= 0");
        if (d != 1 && d != 2) throw std::domain_error("BesovPriorSpec: d must be 1 or 2");
    }
};

struct RescalingResult {
    double eps_n;
    double rho;
    long n;
    double kappa;
    int truncation_level;  // J with 2^{Jd} ~= N eps_N^2, rounded exponent
};

/// eps_N = N^{-(alpha+kappa)/(2 alpha + 2 kappa + d)}, rho = (N eps_N^2)^{-1/p}.
inline RescalingResult rescale_for_n(double alpha, double kappa, int d, double p, long n) {
    if (n < 1) throw std::domain_error("rescale_for_n: N must be >= 1");
    if (!(p >= 1.0)) throw std::domain_error("rescale_for_n: p must be >= 1");
    if (!(alpha > static_cast<double>(d) / p))
        throw std::domain_error("rescale_for_n: alpha must exceed d/p");
    if (kappa < 0.0) throw std::domain_error("rescale_for_n: kappa must be >= 0");
    double dn = static_cast<double>(n);
    double expo = (alpha + kappa) / (2.0 * alpha + 2.0 * kappa + static_cast<double>(d));
    RescalingResult r;
    r.eps_n = std::pow(dn, -expo);
    r.rho = std::pow(dn * r.eps_n * r.eps_n, -1.0 / p);
    r.n = n;
    r.kappa = kappa;
    double j = std::log2(dn * r.eps_n * r.eps_n) / static_cast<double>(d);
    r.truncation_level = static_cast<int>(std::lround(j));
    return r;
}

struct PriorDraw {
    CoeffTree coeffs;           // pre-cutoff coefficients rho * sigma_l * xi_lr
    std::vector<double> field;  // post-cutoff grid function chi * synthesis
};

/// A Besov prior bound to a concrete basis.
class BesovPrior {
public:
    BesovPrior(const BesovPriorSpec& spec, const WaveletBasis& basis)
        : spec_(spec), basis_(basis) {
        if (spec.d != basis.dim())
            throw std::invalid_argument("BesovPrior: spec/basis dimension mismatch");
        level_ = spec.truncation.value_or(basis.max_detail_level());
        if (level_ < -1 || level_ > basis.max_detail_level())
            throw std::domain_error("BesovPrior: truncation level outside basis resolution");
        const std::size_t n = basis.grid_size();
        chi_.resize(basis.grid_points());
        if (basis.dim() == 1) {
            for (std::size_t i = 0; i < n; ++i) chi_[i] = cutoff_profile(basis.coordinate(i));
        } else {
            for (std::size_t iy = 0; iy < n; ++iy)
                for (std::size_t ix = 0; ix < n; ++ix)
                    chi_[iy * n + ix] =
                        cutoff_profile(basis.coordinate(iy)) * cutoff_profile(basis.coordinate(ix));
        }
    }

    const BesovPriorSpec& spec() const { return spec_; }
    const WaveletBasis& basis() const { return basis_; }
    int retained_level() const { return level_; }
    const std::vector<double>& cutoff() const { return chi_; }
    std::size_t retained_coeffs() const {
        return basis_.level_offset(level_) + basis_.level_count(level_);
    }

    /// Per-level marginal scale sigma_l = rho * 2^{-l (alpha + d/2 - d/p)}.
    double sigma(int l) const {
        double d = static_cast<double>(spec_.d);
        return spec_.rho * std::exp2(-static_cast<double>(l) *
                                     (spec_.alpha + d / 2.0 - d / spec_.p));
    }

    std::vector<double> sigma_per_level() const {
        std::vector<double> out;
        for (int l = -1; l <= level_; ++l) out.push_back(sigma(l));
        return out;
    }

    PriorDraw sample(math::Rng& rng) const {
        PExpDist standard(spec_.p, 0.0, 1.0);
        CoeffTree coeffs(basis_);
        for (int l = -1; l <= level_; ++l) {
            double s = sigma(l);
            std::size_t off = basis_.level_offset(l), cnt = basis_.level_count(l);
            for (std::size_t i = 0; i < cnt; ++i)
                coeffs.values[off + i] = s * standard.sample(rng);
        }
        std::vector<double> field = synthesize(coeffs);
        for (std::size_t i = 0; i < field.size(); ++i) field[i] *= chi_[i];
        return {std::move(coeffs), std::move(field)};
    }

private:
    BesovPriorSpec spec_;
    WaveletBasis basis_;
    int level_;
    std::vector<double> chi_;
};

struct SmallBallEstimate {
    double probability;
    double stderr;
    bool zero_hits;  // estimate replaced by the rule-of-three upper bound
};

/// Monte-Carlo estimate of Pi'_J(||theta||_{(H^kappa)*} <= r).
inline SmallBallEstimate small_ball_estimate(const BesovPrior& prior, double kappa, double r,
                                             std::size_t n_mc, math::Rng& rng) {
    if (!(r > 0.0)) throw std::domain_error("small_ball_estimate: r must be > 0");
    if (prior.retained_level() > 8)
        throw std::domain_error("small_ball_estimate: requires truncation J <= 8");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        PriorDraw draw = prior.sample(rng);
        if (sobolev_dual_norm(draw.coeffs, kappa) <= r) ++hits;
    }
    double n = static_cast<double>(n_mc);
    if (hits == 0) return {3.0 / n, 3.0 / n, true};
    double p = static_cast<double>(hits) / n;
    return {p, std::sqrt(p * (1.0 - p) / n), false};
}

/// Dual-norm samples for probing the small-ball exponent at several radii
/// from one draw budget.
inline std::vector<double> dual_norm_samples(const BesovPrior& prior, double kappa,
                                             std::size_t n_mc, math::Rng& rng) {
    std::vector<double> norms(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i)
        norms[i] = sobolev_dual_norm(prior.sample(rng).coeffs, kappa);
    std::sort(norms.begin(), norms.end());
    return norms;
}

struct DecenteringCheck {
    double lhs;        // MC estimate of Pi'(h + A)
    double rhs;        // exp(-||h||^p / p) * MC estimate of Pi'(A)
    double lhs_stderr;
    double rhs_stderr;
    bool pass;         // lhs >= rhs - 3 * combined stderr
};

/// Probe of the decentering inequality Pi'(h+A) >= e^{-||h||^p/p} Pi'(A)
/// for a symmetric per-coefficient box A = prod [-w_i, w_i], p in [1,2].
inline DecenteringCheck decentering_check(const BesovPrior& prior, const CoeffTree& h,
                                          const std::vector<double>& box_halfwidths,
                                          std::size_t n_mc, math::Rng& rng) {
    if (prior.spec().p < 1.0 || prior.spec().p > 2.0)
        throw std::domain_error("decentering_check: p must lie in [1,2]");
    if (prior.retained_level() > 6)
        throw std::domain_error("decentering_check: requires truncation J <= 6");
    std::size_t k = prior.retained_coeffs();
    if (box_halfwidths.size() != k)
        throw std::invalid_argument("decentering_check: box size mismatch");
    for (double w : box_halfwidths)
        if (!(w > 0.0)) throw std::domain_error("decentering_check: degenerate box");

    std::size_t hits_shifted = 0, hits_centred = 0;
    for (std::size_t s = 0; s < n_mc; ++s) {
        PriorDraw draw = prior.sample(rng);
        bool in_shifted = true, in_centred = true;
        for (std::size_t i = 0; i < k && (in_shifted || in_centred); ++i) {
            double t = draw.coeffs.values[i];
            if (std::fabs(t - h.values[i]) > box_halfwidths[i]) in_shifted = false;
            if (std::fabs(t) > box_halfwidths[i]) in_centred = false;
        }
        if (in_shifted) ++hits_shifted;
        if (in_centred) ++hits_centred;
    }
    double n = static_cast<double>(n_mc);
    double p1 = static_cast<double>(hits_shifted) / n;
    double p0 = static_cast<double>(hits_centred) / n;
    double scale = std::exp(-std::pow(besov_norm(h, prior.spec().alpha, prior.spec().p),
                                      prior.spec().p) /
                            prior.spec().p);
    DecenteringCheck out;
    out.lhs = p1;
    out.rhs = scale * p0;
    out.lhs_stderr = std::sqrt(p1 * (1.0 - p1) / n);
    out.rhs_stderr = scale * std::sqrt(p0 * (1.0 - p0) / n);
    double combined = std::sqrt(out.lhs_stderr * out.lhs_stderr +
                                out.rhs_stderr * out.rhs_stderr);
    out.pass = out.lhs >= out.rhs - 3.0 * combined;
    return out;
}

struct TailSurvivalPoint {
    double r;
    double survival;
    double stderr;
};

/// Empirical survival of ||theta||_{B^b_pp} over prior draws at given radii.
inline std::vector<TailSurvivalPoint> besov_tail_survival(const BesovPrior& prior, double b,
                                                          const std::vector<double>& radii,
                                                          std::size_t n_mc, math::Rng& rng) {
    std::vector<double> norms(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i)
        norms[i] = besov_norm(prior.sample(rng).coeffs, b, prior.spec().p);
    std::sort(norms.begin(), norms.end());
    std::vector<TailSurvivalPoint> out;
    double n = static_cast<double>(n_mc);
    for (double r : radii) {
        auto it = std::lower_bound(norms.begin(), norms.end(), r);
        double surv = static_cast<double>(norms.end() - it) / n;
        out.push_back({r, surv, std::sqrt(std::max(surv * (1.0 - surv), 1.0 / n) / n)});
    }
    return out;
}

} // namespace bvi
