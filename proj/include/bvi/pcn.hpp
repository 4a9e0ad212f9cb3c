#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "besov.hpp"
#include "forward.hpp"
#include "math/rng.hpp"
#include "math/special.hpp"
#include "math/stats.hpp"
#include "observation.hpp"
#include "pexp.hpp"
#include "vi.hpp"

// Prior-reversible MCMC reference sampler. Each coefficient is whitened
// through the exact quantile coupling T = F_pexp^{-1} o F_gauss, making the
// prior standard Gaussian in white space; there a preconditioned
// Crank-Nicolson proposal v' = sqrt(1-s^2) v + s w keeps the prior invariant,
// and the Metropolis correction uses the likelihood ratio only.

namespace bvi {

struct ChainConfig {
    double step = 0.2;  // s in (0,1]
    std::size_t iterations = 20000;
    std::size_t burn_in = 2000;
    std::size_t thinning = 10;

    void validate() const {
        if (!(step > 0.0 && step <= 1.0)) throw std::domain_error("ChainConfig: s outside (0,1]");
        if (burn_in >= iterations)
            throw std::domain_error("ChainConfig: burn-in must be below iterations");
        if (thinning < 1) throw std::domain_error("ChainConfig: thinning must be >= 1");
    }
};

struct ChainResult {
    std::vector<std::vector<double>> samples;  // kept draws, coefficient order
    double acceptance_rate = 0.0;
    bool low_acceptance = false;  // acceptance below 1%
};

/// Quantile coupling: standard-normal v to standard p-exponential.
inline double whiten_to_pexp(double p, double v) {
    if (p == 2.0) return v;  // Exp(2;0,1) is standard Gaussian
    PExpDist standard(p, 0.0, 1.0);
    double u = math::norm_cdf(v);
    u = std::min(std::max(u, 1e-300), 1.0 - 1e-16);
    return standard.quantile(u);
}

/// Run a whitened pCN chain targeting the posterior of a truncated prior.
/// The likelihood may be overridden (nullptr = Gaussian regression on data).
inline ChainResult run_chain(const Dataset& data, const BesovPrior& prior,
                             const ForwardMap& map, const ChainConfig& cfg, math::Rng& rng) {
    cfg.validate();
    if (prior.retained_level() > 6)
        throw std::domain_error("run_chain: requires truncated prior with J <= 6");
    const WaveletBasis& basis = prior.basis();
    const std::size_t k = prior.retained_coeffs();
    const double p = prior.spec().p;

    std::vector<double> sigma(k);
    {
        std::size_t i = 0;
        for (int l = -1; l <= prior.retained_level(); ++l)
            for (std::size_t c = 0; c < basis.level_count(l); ++c, ++i)
                sigma[i] = prior.sigma(l);
    }

    auto to_coeffs = [&](const std::vector<double>& v) {
        CoeffTree tree(basis);
        for (std::size_t i = 0; i < k; ++i)
            tree.values[i] = sigma[i] * whiten_to_pexp(p, v[i]);
        return tree;
    };
    auto loglik = [&](const CoeffTree& tree) {
        return data.size() == 0 ? 0.0 : log_likelihood(tree, data, map);
    };

    std::vector<double> v(k);
    for (auto& x : v) x = rng.normal();
    double ll = loglik(to_coeffs(v));

    const double keep = std::sqrt(1.0 - cfg.step * cfg.step);
    std::size_t accepted = 0;
    ChainResult result;
    std::vector<double> vp(k);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        for (std::size_t i = 0; i < k; ++i) vp[i] = keep * v[i] + cfg.step * rng.normal();
        CoeffTree proposal = to_coeffs(vp);
        double llp = loglik(proposal);
        if (std::log(rng.uniform_pos()) < llp - ll) {
            v = vp;
            ll = llp;
            ++accepted;
        }
        if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0)
            result.samples.push_back(to_coeffs(v).values);
    }
    result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.iterations);
    result.low_acceptance = result.acceptance_rate < 0.01;
    return result;
}

/// Pre-run step-size tuning toward 20-30% acceptance.
inline double tune_step(const Dataset& data, const BesovPrior& prior, const ForwardMap& map,
                        std::uint64_t seed, std::size_t probe_iters = 2000) {
    double s = 0.5;
    for (int round = 0; round < 8; ++round) {
        ChainConfig cfg;
        cfg.step = s;
        cfg.iterations = probe_iters;
        cfg.burn_in = probe_iters / 4;
        cfg.thinning = probe_iters;  // keep almost nothing, we only want the rate
        math::Rng rng = math::Rng::substream(seed, {0x7c4eULL, static_cast<std::uint64_t>(round)});
        double rate = run_chain(data, prior, map, cfg, rng).acceptance_rate;
        if (rate > 0.30)
            s = std::min(1.0, s * 1.6);
        else if (rate < 0.20)
            s *= 0.6;
        else
            return s;
        if (s < 1e-4) return 1e-4;
    }
    return s;
}

struct VsChainReport {
    std::vector<double> location_diff;  // VI mean - chain mean, per coefficient
    std::vector<double> scale_ratio;    // VI std / chain std
    double max_location_diff = 0.0;     // scaled by max(|chain mean|, chain std)
    double max_scale_rel_err = 0.0;
    double qq_max_deviation = 0.0;      // worst marginal quantile-quantile gap
};

/// Per-coefficient discrepancies between a variational fit and chain samples.
/// Location differences are reported relative to max(|chain mean|, chain std).
inline VsChainReport compare_vi_to_chain(const MeanFieldParams& params,
                                         const std::vector<std::vector<double>>& samples) {
    if (samples.empty()) throw std::invalid_argument("compare_vi_to_chain: no samples");
    const std::size_t k = params.size();
    const std::size_t m = samples.size();
    VsChainReport rep;
    PExpDist family(params.q, 0.0, 1.0);
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> col(m);
        for (std::size_t s = 0; s < m; ++s) col[s] = samples[s][i];
        double cm = math::mean(col);
        double cs = math::stddev(col);
        double vm = params.marginal_mean(i);
        double vs = params.marginal_std(i);
        rep.location_diff.push_back(vm - cm);
        rep.scale_ratio.push_back(cs > 0.0 ? vs / cs : 0.0);
        double loc_scale = std::max(std::fabs(cm), cs);
        if (loc_scale > 0.0)
            rep.max_location_diff =
                std::max(rep.max_location_diff, std::fabs(vm - cm) / loc_scale);
        if (cs > 0.0)
            rep.max_scale_rel_err = std::max(rep.max_scale_rel_err, std::fabs(vs / cs - 1.0));

        std::sort(col.begin(), col.end());
        for (int qi = 1; qi <= 19; ++qi) {
            double u = static_cast<double>(qi) / 20.0;
            double chain_q = col[static_cast<std::size_t>(u * static_cast<double>(m - 1))];
            double vi_q = params.location[i] + params.scale[i] * family.quantile(u);
            double denom = std::max(vs, 1e-12);
            rep.qq_max_deviation =
                std::max(rep.qq_max_deviation, std::fabs(chain_q - vi_q) / denom);
        }
    }
    return rep;
}

} // namespace bvi
