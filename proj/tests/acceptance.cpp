// Acceptance suite: one check per criterion, one PASS/FAIL line each, nonzero
// exit if anything fails. Tolerances are fixed here, not tuned at runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "bvi/bvi.hpp"
#include "oracles.hpp"

using namespace bvi;

namespace {

struct Criterion {
    std::string name;
    std::function<bool(std::string&)> run;
};

std::vector<double> centers(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = (i + 0.5) / static_cast<double>(n);
    return x;
}

ForwardMap make_darcy_map(const WaveletBasis& basis) {
    DarcyProblem prob(1, basis.grid_size(),
                      std::vector<double>(basis.grid_size(), -1.0), 0.0);
    return ForwardMap::darcy(basis, prob, LinkFunction::darcy(0.0));
}

CoeffTree smooth_bump_theta0(const WaveletBasis& basis, double amplitude) {
    std::vector<double> field(basis.grid_points());
    for (std::size_t i = 0; i < basis.grid_size(); ++i) {
        double s = (basis.coordinate(i) - 0.5) / 0.25;
        field[i] = std::fabs(s) < 1.0 ? amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
    }
    return analyze(field, basis);
}

// ---- Criterion 1 & 2: information-distance identities on Darcy pairs -------

struct PairData {
    std::vector<CoeffTree> a, b;
};

PairData darcy_prior_pairs(const WaveletBasis& basis, std::size_t n_pairs) {
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.3, 4), basis);
    math::Rng rng(2024);
    PairData out;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        out.a.push_back(prior.sample(rng).coeffs);
        out.b.push_back(prior.sample(rng).coeffs);
    }
    return out;
}

bool check_kl_identity(std::string& detail) {
    WaveletBasis basis(1, WaveletFamily::daubechies4, 8);  // n = 256
    ForwardMap map = make_darcy_map(basis);
    PairData pairs = darcy_prior_pairs(basis, 50);
    math::Rng rng(7);
    std::size_t ok = 0;
    double worst_z = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        double quad = kl_between_laws(pairs.a[i], pairs.b[i], map);
        McKlEstimate mc = mc_kl_estimate(pairs.a[i], pairs.b[i], map, 100000, rng);
        double z = std::fabs(mc.value - quad) / mc.stderr;
        worst_z = std::max(worst_z, z);
        if (z <= 3.0) ++ok;
    }
    detail = std::to_string(ok) + "/50 pairs within 3 MC stderr, worst z = " +
             std::to_string(worst_z);
    return ok == 50;
}

bool check_hellinger_sandwich(std::string& detail) {
    WaveletBasis basis(1, WaveletFamily::daubechies4, 8);
    ForwardMap map = make_darcy_map(basis);
    PairData pairs = darcy_prior_pairs(basis, 50);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        double sup = 0.0;
        for (double v : map.apply(pairs.a[i])) sup = std::max(sup, std::fabs(v));
        for (double v : map.apply(pairs.b[i])) sup = std::max(sup, std::fabs(v));
        HellingerReport rep =
            hellinger_and_renyi_bounds(pairs.a[i], pairs.b[i], map, sup + 1e-9);
        if (rep.sandwich_ok && rep.renyi_bound_ok) ++ok;
    }
    detail = std::to_string(ok) + "/50 pairs satisfy the sandwich and the Renyi bound";
    return ok == 50;
}

// ---- Criterion 3: moment law ------------------------------------------------

bool check_moment_law(std::string& detail) {
    math::Rng rng(43);
    std::size_t ok = 0, total = 0;
    double worst_z = 0.0;
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        PExpDist d(p, 0.0, 1.0);
        std::vector<double> draws = d.sample(rng, 100000);
        for (double t : {0.5, 1.0, 2.0, 3.7}) {
            std::vector<double> powed(draws.size());
            for (std::size_t i = 0; i < draws.size(); ++i)
                powed[i] = std::pow(std::fabs(draws[i]), t);
            double z = std::fabs(math::mean(powed) - PExpDist::abs_moment(p, 1.0, t)) /
                       math::mc_stderr(powed);
            worst_z = std::max(worst_z, z);
            ++total;
            if (z <= 3.0) ++ok;
        }
    }
    detail = std::to_string(ok) + "/" + std::to_string(total) +
             " (t, p) combinations within 3 MC stderr, worst z = " + std::to_string(worst_z);
    return ok == total;
}

// ---- Criterion 4: decentering ------------------------------------------------

bool check_decentering(std::string& detail) {
    WaveletBasis basis(1, WaveletFamily::haar, 6);
    const double ps[3] = {1.0, 1.5, 2.0};
    math::Rng rng(47);
    int passed = 0;
    for (int trial = 0; trial < 20; ++trial) {
        double p = ps[trial % 3];
        BesovPrior prior(BesovPriorSpec(p, 2.0, 1, 1.0, 4), basis);
        std::size_t k = prior.retained_coeffs();

        CoeffTree h(basis);
        for (std::size_t i = 0; i < k; ++i) h.values[i] = rng.normal();
        double nrm = besov_norm(h, 2.0, p);
        for (std::size_t i = 0; i < k; ++i) h.values[i] /= nrm;  // ||h||_{B^alpha_pp} = 1

        std::vector<double> widths(k);
        std::size_t i = 0;
        for (int l = -1; l <= 4; ++l)
            for (std::size_t c = 0; c < basis.level_count(l); ++c, ++i)
                widths[i] = 2.0 * prior.sigma(l);
        DecenteringCheck chk = decentering_check(prior, h, widths, 100000, rng);
        if (chk.pass) ++passed;
    }
    detail = std::to_string(passed) + "/20 trials passed (need >= 19)";
    return passed >= 19;
}

// ---- Criterion 5: tail concentration ----------------------------------------

bool check_tail_concentration(std::string& detail) {
    const double p = 1.0, alpha = 2.0, b = alpha - 1.0 - 0.5;  // b = alpha - d/p - 1/2
    WaveletBasis basis(1, WaveletFamily::haar, 7);
    BesovPrior prior(BesovPriorSpec(p, alpha, 1, 1.0, 6), basis);
    const std::size_t n_mc = 100000;

    math::Rng rng(53);
    std::vector<double> norms(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i)
        norms[i] = besov_norm(prior.sample(rng).coeffs, b, p);
    std::sort(norms.begin(), norms.end());

    // upper tail: radii linear in r^p between the 50% and 99.9% quantiles
    double u_lo = std::pow(norms[n_mc / 2], p);
    double u_hi = std::pow(norms[n_mc - n_mc / 1000], p);
    const int points = 10;
    std::vector<double> us, log_s, ses;
    for (int i = 0; i < points; ++i) {
        double u = u_lo + (u_hi - u_lo) * i / (points - 1);
        double r = std::pow(u, 1.0 / p);
        auto it = std::lower_bound(norms.begin(), norms.end(), r);
        double surv = static_cast<double>(norms.end() - it) / static_cast<double>(n_mc);
        us.push_back(u);
        log_s.push_back(std::log(surv));
        ses.push_back(std::sqrt((1.0 - surv) / (surv * static_cast<double>(n_mc))));
    }
    bool decreasing = true;
    for (int i = 1; i < points; ++i)
        if (!(log_s[i] < log_s[i - 1])) decreasing = false;
    bool convex = true;
    for (int i = 1; i + 1 < points; ++i) {
        double dd = log_s[i + 1] - 2.0 * log_s[i] + log_s[i - 1];
        double slack = 3.0 * std::sqrt(ses[i - 1] * ses[i - 1] + 4.0 * ses[i] * ses[i] +
                                       ses[i + 1] * ses[i + 1]);
        if (dd < -slack) convex = false;
    }
    double r2 = math::ols(us, log_s).r_squared;
    detail = "R^2 = " + std::to_string(r2) + ", decreasing = " + (decreasing ? "yes" : "no") +
             ", convex within noise = " + (convex ? "yes" : "no");
    return decreasing && convex && r2 > 0.95;
}

// ---- Criterion 6: small-ball exponent ----------------------------------------

bool check_small_ball(std::string& detail) {
    const double p = 2.0, alpha = 2.0, kappa = 1.0;
    const double target = -p * 1.0 / (p * (alpha + kappa) - 1.0);  // -2/5
    WaveletBasis basis(1, WaveletFamily::haar, 9);
    BesovPrior prior(BesovPriorSpec(p, alpha, 1, 1.0, 8), basis);
    math::Rng rng(59);
    std::vector<double> norms = dual_norm_samples(prior, kappa, 200000, rng);

    std::vector<double> log_r, log_neg_log_p;
    bool degenerate = false;
    for (int i = 0; i < 8; ++i) {
        double r = 0.05 * std::pow(0.5 / 0.05, i / 7.0);
        auto it = std::upper_bound(norms.begin(), norms.end(), r);
        double prob = static_cast<double>(it - norms.begin()) / static_cast<double>(norms.size());
        if (prob <= 0.0 || prob >= 1.0) { degenerate = true; continue; }
        log_r.push_back(std::log(r));
        log_neg_log_p.push_back(std::log(-std::log(prob)));
    }
    if (degenerate || log_r.size() < 4) {
        detail = "insufficient hits across the radius grid";
        return false;
    }
    double slope = math::ols(log_r, log_neg_log_p).slope;
    detail = "fitted slope " + std::to_string(slope) + " vs theoretical " +
             std::to_string(target) + " (tolerance 30%)";
    return std::fabs(slope - target) <= 0.3 * std::fabs(target);
}

// ---- Criterion 7: projection decay --------------------------------------------

bool check_projection_decay(std::string& detail) {
    const double alpha0 = 2.0, kappa = 1.0;
    WaveletBasis basis(1, WaveletFamily::haar, 10);
    CoeffTree theta0(basis);
    for (int l = 0; l <= basis.max_detail_level(); ++l) {
        double mag = std::exp2(-l * (alpha0 + 0.5));
        std::size_t off = basis.level_offset(l);
        for (std::size_t r = 0; r < basis.level_count(l); ++r) theta0.values[off + r] = mag;
    }
    std::vector<double> js, logs;
    for (int J = 2; J <= 6; ++J) {
        CoeffTree tail = theta0;
        CoeffTree proj = project(theta0, J);
        for (std::size_t i = 0; i < tail.size(); ++i) tail.values[i] -= proj.values[i];
        js.push_back(J);
        logs.push_back(std::log2(sobolev_dual_norm(tail, kappa)));
    }
    double slope = math::ols(js, logs).slope;
    detail = "log2 slope " + std::to_string(slope) + " vs -(alpha0+kappa) = -3 (tolerance 0.2)";
    return std::fabs(slope + (alpha0 + kappa)) <= 0.2;
}

// ---- Criterion 8: Darcy solver -------------------------------------------------

bool check_darcy_solver(std::string& detail) {
    const std::size_t n = 1024;
    DarcyProblem prob(1, n, std::vector<double>(n, -1.0));
    std::vector<double> u = solve_darcy(prob, std::vector<double>(n, 1.0));
    auto xs = centers(n);
    double max_err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        max_err = std::max(max_err, std::fabs(u[i] - xs[i] * (1.0 - xs[i]) / 2.0));

    auto exact_u = [](double x) { return std::sin(math::pi * x); };
    auto exact_f = [](double x) { return 1.0 + 0.5 * std::sin(2.0 * math::pi * x); };
    auto exact_g = [&](double x) {
        double fp = math::pi * std::cos(2.0 * math::pi * x);
        double up = math::pi * std::cos(math::pi * x);
        double upp = -math::pi * math::pi * std::sin(math::pi * x);
        return fp * up + exact_f(x) * upp;
    };
    std::vector<double> errs, logns;
    for (std::size_t m : {128, 256, 512, 1024}) {
        auto xm = centers(m);
        std::vector<double> f(m), g(m);
        for (std::size_t i = 0; i < m; ++i) {
            f[i] = exact_f(xm[i]);
            g[i] = exact_g(xm[i]);
        }
        DarcyProblem pm(1, m, g);
        std::vector<double> um = solve_darcy(pm, f);
        double e = 0.0;
        for (std::size_t i = 0; i < m; ++i) e = std::max(e, std::fabs(um[i] - exact_u(xm[i])));
        errs.push_back(std::log2(e));
        logns.push_back(std::log2(static_cast<double>(m)));
    }
    double order = -math::ols(logns, errs).slope;
    detail = "analytic max error " + std::to_string(max_err) + " (< 1e-5), order " +
             std::to_string(order) + " (in [1.8, 2.2])";
    return max_err < 1e-5 && order >= 1.8 && order <= 2.2;
}

// ---- Criterion 9: subdiffusion solver ------------------------------------------

bool check_subdiffusion_solver(std::string& detail) {
    const std::size_t n = 256, m = 2048;
    const double beta = 0.5, t_final = 0.1;
    auto xs = centers(n);
    std::vector<double> u0(n), zero(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) u0[i] = std::sin(math::pi * xs[i]);
    SubdiffusionProblem prob(n, m, beta, t_final, zero, u0, 0.0, 0.0, 2.0);
    std::vector<double> u = solve_subdiffusion(prob, std::vector<double>(n, 0.0));
    double factor = oracles::mittag_leffler(beta, -math::pi * math::pi * std::sqrt(t_final));
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        err = std::max(err, std::fabs(u[i] - factor * std::sin(math::pi * xs[i])));
    detail = "max error vs Mittag-Leffler oracle " + std::to_string(err) + " (< 2e-3)";
    return err < 2e-3;
}

// ---- Criterion 10: VI sanity ----------------------------------------------------

bool check_vi_sanity(std::string& detail) {
    // (a) N = 0 recovers the prior
    WaveletBasis basis(1, WaveletFamily::haar, 6);
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.8, 3), basis);
    ForwardMap toy = ForwardMap::linear_toy(basis);
    Dataset empty;
    empty.dim = 1;
    FitConfig cfg;
    cfg.max_iterations = 4000;
    cfg.learning_rate = 0.01;
    cfg.mc_samples = 1;
    math::Rng rng(61);
    FitReport rec = fit(empty, prior, toy, 2.0, cfg, rng);
    double max_loc = 0.0, max_scale_rel = 0.0;
    std::size_t i = 0;
    for (int l = -1; l <= 3; ++l)
        for (std::size_t c = 0; c < basis.level_count(l); ++c, ++i) {
            max_loc = std::max(max_loc, std::fabs(rec.params.location[i]));
            max_scale_rel = std::max(max_scale_rel,
                                     std::fabs(rec.params.scale[i] / prior.sigma(l) - 1.0));
        }
    bool prior_ok = max_loc < 1e-3 && max_scale_rel < 0.02;

    // (b) conjugate Gaussian toy recovers the analytic posterior within 2%
    WaveletBasis tiny(1, WaveletFamily::haar, 4);
    BesovPrior one(BesovPriorSpec(2.0, 2.0, 1, std::exp2(-2.0), -1), tiny);  // sigma = 1
    ForwardMap toy1 = ForwardMap::linear_toy(tiny);
    CoeffTree truth(tiny);
    truth.values[0] = 0.8;
    const std::size_t n = 40;
    Dataset ds = simulate(truth, toy1, n, 7);
    double sum_y = 0.0;
    for (double y : ds.y) sum_y += y;
    double post_var = 1.0 / (static_cast<double>(n) + 1.0);
    double post_mean = sum_y * post_var;
    FitConfig cfg2;
    cfg2.max_iterations = 6000;
    cfg2.min_iterations = 5000;
    cfg2.learning_rate = 0.02;
    cfg2.mc_samples = 32;
    math::Rng rng2(67);
    FitReport conj = fit(ds, one, toy1, 2.0, cfg2, rng2);
    bool conj_ok =
        std::fabs(conj.params.location[0] - post_mean) < 0.02 * std::fabs(post_mean) &&
        std::fabs(conj.params.scale[0] / std::sqrt(post_var) - 1.0) < 0.02;

    // (c) ELBO gradient matches central finite differences within 1e-4 relative
    BesovPrior gprior(BesovPriorSpec(2.0, 2.0, 1, 0.5, 2), basis);
    math::Rng rng3(71);
    CoeffTree theta0 = gprior.sample(rng3).coeffs;
    Dataset gds = simulate(theta0, toy, 150, 9);
    MeanFieldParams mf = prior_params(gprior, 2.0);
    for (std::size_t j = 0; j < mf.size(); ++j) {
        mf.location[j] = 0.07 * static_cast<double>(j % 3) - 0.05;
        mf.scale[j] = 0.6 * gprior.sigma(0);
    }
    NoiseMatrix noise = draw_noise(2.0, 64, mf.size(), rng3);
    ElboGrad grad = elbo_and_grad(mf, gds, gprior, toy, noise);
    bool grad_ok = true;
    for (std::size_t j : {std::size_t{0}, std::size_t{2}, std::size_t{5}}) {
        double h = 1e-5;
        MeanFieldParams pp = mf, pm = mf;
        pp.location[j] += h;
        pm.location[j] -= h;
        double fd = (elbo_and_grad(pp, gds, gprior, toy, noise).elbo -
                     elbo_and_grad(pm, gds, gprior, toy, noise).elbo) /
                    (2.0 * h);
        if (std::fabs(grad.d_location[j] - fd) > 1e-4 * std::fabs(fd)) grad_ok = false;
        MeanFieldParams sp = mf, sm = mf;
        sp.scale[j] += h;
        sm.scale[j] -= h;
        double fds = (elbo_and_grad(sp, gds, gprior, toy, noise).elbo -
                      elbo_and_grad(sm, gds, gprior, toy, noise).elbo) /
                     (2.0 * h);
        if (std::fabs(grad.d_scale[j] - fds) > 1e-4 * std::fabs(fds)) grad_ok = false;
    }

    detail = std::string("prior recovery ") + (prior_ok ? "ok" : "FAILED") +
             " (max |a| = " + std::to_string(max_loc) +
             ", max scale rel err = " + std::to_string(max_scale_rel) + "), conjugate " +
             (conj_ok ? "ok" : "FAILED") + ", gradient check " + (grad_ok ? "ok" : "FAILED");
    return prior_ok && conj_ok && grad_ok;
}

// ---- Criterion 11: oracle bound trend --------------------------------------------

bool check_oracle_bound_trend(std::string& detail) {
    const double alpha = 2.0, kappa = 1.0, p = 1.0;
    WaveletBasis basis(1, WaveletFamily::daubechies4, 8);
    ForwardMap map = make_darcy_map(basis);
    CoeffTree theta0 = smooth_bump_theta0(basis, 1.0);
    std::vector<double> g0 = map.apply(theta0);

    // common random numbers across N so the trend of the MC term is not
    // scrambled by independent sampling noise
    const std::size_t n_mc = 512;
    math::Rng noise_rng(83);
    NoiseMatrix z = draw_noise(p, n_mc, basis.size(), noise_rng);

    std::vector<double> ns, ratios;
    for (int e = 7; e <= 13; ++e) {
        long n = 1L << e;
        RescalingResult rs = rescale_for_n(alpha, kappa, 1, p, n);
        BesovPrior prior(BesovPriorSpec(p, alpha, 1, rs.rho), basis);  // untruncated

        // 2^{Jd} ~ N eps^2 fixes J only up to a constant; take the best
        // R among the rounded level and its neighbors (the theorem's bound
        // dominates every choice, so the envelope is the honest witness and
        // avoids the sawtooth that integer rounding puts into the ratio).
        double r = std::numeric_limits<double>::infinity();
        for (int j_oracle = std::max(0, rs.truncation_level - 1);
             j_oracle <= std::min(basis.max_detail_level(), rs.truncation_level + 1);
             ++j_oracle) {
            MeanFieldParams qn = oracle_qn(theta0, prior, kappa, j_oracle, p);
            double kl_term = kl_to_prior(qn, prior) / static_cast<double>(n);
            std::vector<double> vals(n_mc);
            for (std::size_t s = 0; s < n_mc; ++s) {
                CoeffTree draw = realize_draw(qn, basis, z, s);
                std::vector<double> g = map.apply(draw);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= g0[i];
                double nrm = l2_lambda_norm(g);
                vals[s] = 0.5 * nrm * nrm;
            }
            r = std::min(r, kl_term + math::mean(vals));
        }
        double bound = rs.eps_n * rs.eps_n * std::log(static_cast<double>(n));
        ns.push_back(static_cast<double>(n));
        ratios.push_back(r / bound);
    }
    double rho = math::spearman_rho(ns, ratios);
    detail = "Spearman rho of R/(eps^2 log N) vs N = " + std::to_string(rho) +
             " (need <= 0); ratios " + std::to_string(ratios.front()) + " -> " +
             std::to_string(ratios.back());
    return rho <= 0.0;
}

// ---- Criterion 12: contraction trend ----------------------------------------------

bool check_contraction_trend(std::string& detail) {
    ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(R"({
        "problem": {"kind": "darcy", "grid_level": 8, "wavelet": "db4"},
        "prior": {"p": 1.0, "alpha": 2.0, "kappa": 1.0, "scaling": "rescale",
                   "truncation": "none"},
        "theta0": {"kind": "smooth-bump", "amplitude": 1.0},
        "vi": {"iterations": 1200, "min_iterations": 400, "learning_rate": 0.03,
                "mc_samples": 8, "eval_mc_samples": 512},
        "rates": {"n_grid": [64, 128, 256, 512, 1024, 2048, 4096], "replicates": 5},
        "seed": 29
    })"));
    RateResult result = run_rates(cfg);
    const auto& medians = result.summary["median_prediction_error"];
    bool strictly_decreasing = true;
    for (std::size_t i = 1; i < medians.size(); ++i)
        if (!(medians[i].get<double>() < medians[i - 1].get<double>()))
            strictly_decreasing = false;
    double slope = result.summary["prediction"]["slope"].get<double>();
    double ci = result.summary["prediction"]["slope_ci95_halfwidth"].get<double>();
    bool ci_excludes_zero = slope + ci < 0.0;
    std::size_t failed = result.summary["failed_cells"].get<std::size_t>();
    detail = "slope " + std::to_string(slope) + " +- " + std::to_string(ci) +
             ", strictly decreasing = " + (strictly_decreasing ? "yes" : "no") +
             ", failed cells = " + std::to_string(failed);
    return strictly_decreasing && slope < -0.1 && ci_excludes_zero && failed == 0;
}

// ---- Criterion 13: VI vs MCMC -------------------------------------------------------

bool check_vi_vs_mcmc(std::string& detail) {
    // conjugate toy
    WaveletBasis tiny(1, WaveletFamily::haar, 4);
    BesovPrior one(BesovPriorSpec(2.0, 2.0, 1, std::exp2(-2.0), -1), tiny);
    ForwardMap toy = ForwardMap::linear_toy(tiny);
    CoeffTree truth(tiny);
    truth.values[0] = 0.8;
    Dataset ds = simulate(truth, toy, 40, 7);

    FitConfig fit_cfg;
    fit_cfg.max_iterations = 6000;
    fit_cfg.min_iterations = 5000;
    fit_cfg.learning_rate = 0.02;
    fit_cfg.mc_samples = 32;
    math::Rng fr(97);
    FitReport vi_fit = fit(ds, one, toy, 2.0, fit_cfg, fr);

    ChainConfig cc;
    cc.step = tune_step(ds, one, toy, 101);
    cc.iterations = 400000;
    cc.burn_in = 20000;
    cc.thinning = 10;
    math::Rng cr(103);
    ChainResult chain = run_chain(ds, one, toy, cc, cr);
    VsChainReport toy_rep = compare_vi_to_chain(vi_fit.params, chain.samples);
    bool toy_ok = toy_rep.max_location_diff < 0.03 && toy_rep.max_scale_rel_err < 0.10;

    // J = 4 Darcy problem (moderate fixed prior scaling keeps the posterior
    // in the regime where a product family can match marginals)
    WaveletBasis basis(1, WaveletFamily::haar, 7);
    ForwardMap map = make_darcy_map(basis);
    const long n_data = 256;
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.25, 4), basis);
    CoeffTree theta0 = smooth_bump_theta0(basis, 0.5);
    Dataset darcy_ds = simulate(theta0, map, n_data, 11);

    FitConfig fd;
    fd.max_iterations = 6000;
    fd.min_iterations = 4500;
    fd.learning_rate = 0.02;
    fd.mc_samples = 8;
    math::Rng fr2(107);
    FitReport darcy_fit = fit(darcy_ds, prior, map, 2.0, fd, fr2);

    ChainConfig cc2;
    cc2.step = tune_step(darcy_ds, prior, map, 109);
    cc2.iterations = 600000;
    cc2.burn_in = 60000;
    cc2.thinning = 20;
    math::Rng cr2(113);
    ChainResult chain2 = run_chain(darcy_ds, prior, map, cc2, cr2);
    VsChainReport rep = compare_vi_to_chain(darcy_fit.params, chain2.samples);
    bool darcy_ok = rep.max_location_diff < 0.03 && rep.max_scale_rel_err < 0.10;

    detail = "toy: location diff " + std::to_string(toy_rep.max_location_diff) + ", scale err " +
             std::to_string(toy_rep.max_scale_rel_err) + "; darcy: location diff " +
             std::to_string(rep.max_location_diff) + ", scale err " +
             std::to_string(rep.max_scale_rel_err) +
             " (acceptance " + std::to_string(chain2.acceptance_rate) + ")";
    return toy_ok && darcy_ok;
}

} // namespace

int main() {
    std::vector<Criterion> criteria = {
        {"kl-identity (Prop 5.1, KL form)", check_kl_identity},
        {"hellinger-sandwich (Prop 5.1)", check_hellinger_sandwich},
        {"pexp-moment-law", check_moment_law},
        {"decentering (p in [1,2], J=4)", check_decentering},
        {"besov-tail-concentration (J=6)", check_tail_concentration},
        {"small-ball-exponent (2,2,1,1)", check_small_ball},
        {"projection-tail-decay", check_projection_decay},
        {"darcy-solver", check_darcy_solver},
        {"subdiffusion-solver", check_subdiffusion_solver},
        {"vi-sanity", check_vi_sanity},
        {"oracle-bound-trend", check_oracle_bound_trend},
        {"contraction-trend", check_contraction_trend},
        {"vi-vs-mcmc-agreement", check_vi_vs_mcmc},
    };

    int failures = 0;
    for (auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %-36s (%.1fs) %s\n", ok ? "PASS" : "FAIL", c.name.c_str(), secs,
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all %zu criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}
