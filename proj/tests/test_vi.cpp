#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bvi/vi.hpp"

using namespace bvi;

namespace {

/// Single retained coefficient (J = -1) with unit prior scale: rho chosen so
/// sigma_{-1} = 1. The toy forward map makes the model conjugate for p = 2.
struct ConjugateToy {
    WaveletBasis basis{1, WaveletFamily::haar, 4};
    double alpha = 2.0;
    double rho = std::exp2(-(2.0 + 0.5 - 0.5));  // sigma_{-1} = rho * 2^{alpha+d/2-d/p} = 1
    BesovPrior prior{BesovPriorSpec(2.0, alpha, 1, rho, -1), basis};
    ForwardMap map = ForwardMap::linear_toy(basis);
};

Dataset constant_design_data(const ConjugateToy& toy, double theta_true, std::size_t n,
                             std::uint64_t seed) {
    CoeffTree t(toy.basis);
    t.values[0] = theta_true;
    return simulate(t, toy.map, n, seed);
}

} // namespace

TEST_CASE("kl_to_prior: zero at the prior, conjugate value, padding invariance") {
    WaveletBasis basis(1, WaveletFamily::haar, 6);
    BesovPrior prior(BesovPriorSpec(1.5, 2.0, 1, 0.7, 3), basis);

    MeanFieldParams at_prior = prior_params(prior, prior.spec().p);
    CHECK_THAT(kl_to_prior(at_prior, prior), Catch::Matchers::WithinAbs(0.0, 1e-12));

    ConjugateToy toy;
    MeanFieldParams mf = prior_params(toy.prior, 2.0);
    mf.location[0] = 1.0;
    mf.scale[0] = 1.0;
    CHECK_THAT(kl_to_prior(mf, toy.prior), Catch::Matchers::WithinAbs(0.5, 1e-10));

    // enlarging the retained set with prior-matching components adds zero terms
    BesovPrior wider(BesovPriorSpec(1.5, 2.0, 1, 0.7, 5), basis);
    MeanFieldParams padded = prior_params(wider, 1.5);
    MeanFieldParams narrow = prior_params(prior, 1.5);
    narrow.location[2] = 0.3;
    padded.location[2] = 0.3;
    CHECK_THAT(kl_to_prior(padded, wider),
               Catch::Matchers::WithinAbs(kl_to_prior(narrow, prior), 1e-12));

    MeanFieldParams mismatched = prior_params(prior, 1.5);
    CHECK_THROWS_AS(kl_to_prior(mismatched, wider), std::invalid_argument);
}

TEST_CASE("mean-field additivity cross-checked against 2-D quadrature") {
    // two coefficients: the product KL equals the sum of 1-D KLs; verify the
    // sum against a brute-force double integral
    PExpDist q1(1.5, 0.4, 0.8), q2(1.5, -0.2, 1.1);
    PExpDist p1(1.5, 0.0, 1.0), p2(1.5, 0.0, 0.5);
    double sum_1d = kl_divergence(q1, p1) + kl_divergence(q2, p2);
    double quad = math::integrate(
        [&](double x) {
            return q1.density(x) *
                   math::integrate(
                       [&](double y) {
                           return q2.density(y) * (q1.log_density(x) + q2.log_density(y) -
                                                   p1.log_density(x) - p2.log_density(y));
                       },
                       -2.0 - 12.0 * 1.1, -0.2 + 12.0 * 1.1, 1e-9);
        },
        0.4 - 12.0 * 0.8, 0.4 + 12.0 * 0.8, 1e-7);
    CHECK_THAT(sum_1d, Catch::Matchers::WithinAbs(quad, 1e-5));
}

TEST_CASE("elbo with no data equals minus the KL") {
    WaveletBasis basis(1, WaveletFamily::haar, 5);
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.6, 2), basis);
    ForwardMap map = ForwardMap::linear_toy(basis);
    Dataset empty;
    empty.dim = 1;

    MeanFieldParams at_prior = prior_params(prior, 2.0);
    math::Rng rng(3);
    ElboEstimate e = elbo(at_prior, empty, prior, map, 16, rng);
    CHECK_THAT(e.value, Catch::Matchers::WithinAbs(0.0, 1e-12));

    MeanFieldParams moved = at_prior;
    moved.location[0] = 0.5;
    ElboEstimate e2 = elbo(moved, empty, prior, map, 4, rng);
    CHECK_THAT(e2.value, Catch::Matchers::WithinAbs(-kl_to_prior(moved, prior), 1e-12));
    CHECK(e2.value < 0.0);
}

TEST_CASE("conjugate toy: analytic posterior beats the prior in ELBO and fit recovers it") {
    ConjugateToy toy;
    const double theta_true = 0.8;
    const std::size_t n = 40;
    Dataset ds = constant_design_data(toy, theta_true, n, 7);

    // G(theta) = theta * 1 (constant field): posterior is Gaussian with
    // variance 1/(N + 1) and mean sum(Y)/(N + 1) for unit prior scale.
    double sum_y = 0.0;
    for (double y : ds.y) sum_y += y;
    double post_var = 1.0 / (static_cast<double>(n) + 1.0);
    double post_mean = sum_y * post_var;

    MeanFieldParams analytic = prior_params(toy.prior, 2.0);
    analytic.location[0] = post_mean;
    analytic.scale[0] = std::sqrt(post_var);
    MeanFieldParams at_prior = prior_params(toy.prior, 2.0);

    math::Rng r1(11), r2(11);
    ElboEstimate e_analytic = elbo(analytic, ds, toy.prior, toy.map, 256, r1);
    ElboEstimate e_prior = elbo(at_prior, ds, toy.prior, toy.map, 256, r2);
    CHECK(e_analytic.value > e_prior.value);

    FitConfig cfg;
    cfg.max_iterations = 6000;
    cfg.min_iterations = 5000;  // the ELBO is quadratically flat near the optimum
    cfg.learning_rate = 0.02;
    cfg.mc_samples = 32;
    math::Rng fit_rng(23);
    FitReport report = fit(ds, toy.prior, toy.map, 2.0, cfg, fit_rng);
    CHECK_THAT(report.params.location[0], Catch::Matchers::WithinAbs(post_mean, 0.02 * std::fabs(post_mean) + 0.01));
    CHECK_THAT(report.params.scale[0], Catch::Matchers::WithinRel(std::sqrt(post_var), 0.02));
}

TEST_CASE("elbo MC stderr shrinks like n_mc^{-1/2}") {
    ConjugateToy toy;
    Dataset ds = constant_design_data(toy, 0.5, 50, 3);
    MeanFieldParams mf = prior_params(toy.prior, 2.0);
    mf.location[0] = 0.4;
    mf.scale[0] = 0.5;
    std::vector<double> log_n, log_se;
    math::Rng rng(31);
    for (std::size_t n_mc : {100, 1000, 10000}) {
        ElboEstimate e = elbo(mf, ds, toy.prior, toy.map, n_mc, rng);
        log_n.push_back(std::log(static_cast<double>(n_mc)));
        log_se.push_back(std::log(e.stderr));
    }
    double slope = math::ols(log_n, log_se).slope;
    CHECK(slope > -0.5 - 0.15);
    CHECK(slope < -0.5 + 0.15);
}

TEST_CASE("reparameterization gradient matches finite differences (common noise)") {
    WaveletBasis basis(1, WaveletFamily::haar, 5);
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.5, 2), basis);
    ForwardMap map = ForwardMap::linear_toy(basis);
    math::Rng rng(41);
    CoeffTree theta0 = prior.sample(rng).coeffs;
    Dataset ds = simulate(theta0, map, 120, 5);

    MeanFieldParams mf = prior_params(prior, 2.0);
    for (std::size_t i = 0; i < mf.size(); ++i) {
        mf.location[i] = 0.1 * static_cast<double>(i % 3) - 0.05;
        mf.scale[i] = 0.5 * prior.sigma(-1) * (1.0 + 0.2 * static_cast<double>(i % 2));
    }
    NoiseMatrix noise = draw_noise(2.0, 64, mf.size(), rng);
    ElboGrad g = elbo_and_grad(mf, ds, prior, map, noise);

    auto value_at = [&](const MeanFieldParams& p) {
        return elbo_and_grad(p, ds, prior, map, noise).elbo;
    };
    for (std::size_t j : {std::size_t{0}, std::size_t{2}, std::size_t{5}}) {
        double h = 1e-5;
        MeanFieldParams pp = mf, pm = mf;
        pp.location[j] += h;
        pm.location[j] -= h;
        double fd = (value_at(pp) - value_at(pm)) / (2.0 * h);
        CHECK_THAT(g.d_location[j], Catch::Matchers::WithinRel(fd, 1e-4));

        MeanFieldParams sp = mf, sm = mf;
        sp.scale[j] += h;
        sm.scale[j] -= h;
        double fds = (value_at(sp) - value_at(sm)) / (2.0 * h);
        CHECK_THAT(g.d_scale[j], Catch::Matchers::WithinRel(fds, 1e-4));
    }
}

TEST_CASE("fit with no data recovers the prior") {
    WaveletBasis basis(1, WaveletFamily::haar, 6);
    for (double p : {1.0, 2.0}) {
        BesovPrior prior(BesovPriorSpec(p, 2.0, 1, 0.8, 3), basis);
        ForwardMap map = ForwardMap::linear_toy(basis);
        Dataset empty;
        empty.dim = 1;
        FitConfig cfg;
        cfg.max_iterations = 4000;
        cfg.learning_rate = 0.01;
        cfg.mc_samples = 1;  // no likelihood term; gradients are deterministic
        math::Rng rng(5);
        FitReport report = fit(empty, prior, map, p, cfg, rng);
        std::size_t i = 0;
        for (int l = -1; l <= 3; ++l) {
            double sigma = prior.sigma(l);
            for (std::size_t c = 0; c < basis.level_count(l); ++c, ++i) {
                CHECK_THAT(report.params.location[i], Catch::Matchers::WithinAbs(0.0, 1e-3));
                CHECK_THAT(report.params.scale[i], Catch::Matchers::WithinRel(sigma, 0.02));
            }
        }
    }
}

TEST_CASE("fit is deterministic for a fixed seed") {
    ConjugateToy toy;
    Dataset ds = constant_design_data(toy, 0.6, 30, 9);
    FitConfig cfg;
    cfg.max_iterations = 400;
    cfg.min_iterations = 100;
    math::Rng r1(77), r2(77);
    FitReport a = fit(ds, toy.prior, toy.map, 2.0, cfg, r1);
    FitReport b = fit(ds, toy.prior, toy.map, 2.0, cfg, r2);
    CHECK(a.iterations == b.iterations);
    CHECK(a.trace == b.trace);
    CHECK(a.params.location == b.params.location);
    CHECK(a.params.scale == b.params.scale);
}

TEST_CASE("oracle measure") {
    WaveletBasis basis(1, WaveletFamily::haar, 6);
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.5), basis);  // untruncated
    CoeffTree theta0(basis);
    math::Rng rng(3);
    for (auto& v : theta0.values) v = rng.normal() * 0.1;

    MeanFieldParams qn = oracle_qn(theta0, prior, 1.0, 3, 2.0);
    // tau = 2^{-J(alpha+kappa+d/2)} = 2^{-3*3.5}
    double tau = std::exp2(-10.5);
    CHECK_THAT(qn.scale[0], Catch::Matchers::WithinRel(tau, 1e-12));
    std::size_t i = 0;
    for (int l = -1; l <= basis.max_detail_level(); ++l) {
        for (std::size_t c = 0; c < basis.level_count(l); ++c, ++i) {
            CHECK(qn.location[i] == theta0.values[i]);
            if (l <= 3)
                CHECK_THAT(qn.scale[i], Catch::Matchers::WithinRel(tau, 1e-12));
            else
                CHECK_THAT(qn.scale[i], Catch::Matchers::WithinRel(prior.sigma(l), 1e-12));
        }
    }

    CoeffTree zero(basis);
    MeanFieldParams qz = oracle_qn(zero, prior, 1.0, 2, 2.0);
    for (double a : qz.location) CHECK(a == 0.0);

    CHECK_THROWS_AS(oracle_qn(theta0, prior, 1.0, 99, 2.0), std::domain_error);
}

TEST_CASE("evaluate_r: analytic value at the pushed-forward prior (p = 2, toy map)") {
    WaveletBasis basis(1, WaveletFamily::haar, 5);
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.4, 3), basis);
    ForwardMap map = ForwardMap::linear_toy(basis);
    CoeffTree theta0(basis);
    MeanFieldParams at_prior = prior_params(prior, 2.0);

    // R = 0 + E 1/2 ||theta||^2 = 1/2 sum_l sigma_l^2 |R_l|
    double analytic = 0.0;
    for (int l = -1; l <= 3; ++l)
        analytic += prior.sigma(l) * prior.sigma(l) * static_cast<double>(basis.level_count(l));
    analytic *= 0.5;

    math::Rng rng(13);
    const std::size_t n_mc = 20000;
    double r = evaluate_r(at_prior, prior, theta0, map, 100, n_mc, rng);
    CHECK(r >= 0.0);
    CHECK_THAT(r, Catch::Matchers::WithinRel(analytic, 0.05));
}

TEST_CASE("posterior functionals: concentration, analytic toy value, monotonicity") {
    WaveletBasis basis(1, WaveletFamily::haar, 5);
    BesovPrior prior(BesovPriorSpec(2.0, 2.0, 1, 0.4, 2), basis);
    ForwardMap map = ForwardMap::linear_toy(basis);
    math::Rng rng(17);
    CoeffTree theta0 = prior.sample(rng).coeffs;

    MeanFieldParams concentrated = prior_params(prior, 2.0);
    for (std::size_t i = 0; i < concentrated.size(); ++i) {
        concentrated.location[i] = theta0.values[i];
        concentrated.scale[i] = MeanFieldParams::b_min;
    }
    PosteriorFunctionals pf =
        posterior_functionals(concentrated, prior, theta0, map, 2.0, 200, rng);
    CHECK(pf.pred_error_sq < 1e-6);
    CHECK(pf.param_error_sq < 1e-6);

    // analytic tau = 2 value on the toy map: sum (a-theta0)^2 + sum b^2 E Z^2
    MeanFieldParams spread = concentrated;
    double analytic = 0.0;
    for (std::size_t i = 0; i < spread.size(); ++i) {
        spread.location[i] = theta0.values[i] + 0.05;
        spread.scale[i] = 0.1;
        analytic += 0.05 * 0.05 + 0.1 * 0.1 * PExpDist::abs_moment(2.0, 1.0, 2.0);
    }
    math::Rng rng2(19);
    PosteriorFunctionals pf2 =
        posterior_functionals(spread, prior, theta0, map, 2.0, 40000, rng2);
    CHECK_THAT(pf2.pred_error_sq, Catch::Matchers::WithinRel(analytic, 0.05));

    // widening every scale increases the tau = 2 functional
    MeanFieldParams wider = spread;
    for (auto& b : wider.scale) b *= 2.0;
    math::Rng rng3(19);
    PosteriorFunctionals pf3 = posterior_functionals(wider, prior, theta0, map, 2.0, 40000, rng3);
    CHECK(pf3.pred_error_sq > pf2.pred_error_sq);

    CHECK_THROWS_AS(posterior_functionals(spread, prior, theta0, map, -1.0, 10, rng),
                    std::domain_error);
}
