#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "besov.hpp"
#include "forward.hpp"
#include "math/stats.hpp"
#include "observation.hpp"
#include "pcn.hpp"
#include "vi.hpp"
#include "wavelet.hpp"

// Experiment configuration (strict JSON schema: unknown keys are rejected and
// every default is echoed back), problem builders, and the contraction-rate
// harness driving simulate -> fit -> evaluate over an N grid with replicates.

namespace bvi {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) { known = true; break; }
        if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

} // namespace detail

struct ProblemConfig {
    std::string kind = "darcy";  // darcy | subdiffusion | linear-toy
    int d = 1;
    int grid_level = 8;          // n = 2^grid_level per axis
    std::string wavelet = "db4"; // haar | db4
    double k_min = 0.0;          // darcy
    double source_constant = -1.0;
    double m0 = 2.0;             // subdiffusion / logistic
    double beta = 0.5;
    double final_time = 1.0;
    int time_steps = 64;
    double source_level = 1.0;   // subdiffusion source f
    double boundary = 1.0;       // subdiffusion a0 = a1 = u0 level
};

struct PriorConfig {
    double p = 1.0;
    double alpha = 2.0;
    double kappa = 1.0;
    std::string scaling = "rescale";     // rescale | fixed
    double rho = 1.0;                    // used when scaling == fixed
    std::string truncation = "rescale";  // rescale | fixed | none
    int j = 4;                           // used when truncation == fixed
};

struct Theta0Config {
    std::string kind = "smooth-bump";  // smooth-bump | zero
    double amplitude = 1.0;
};

struct ViConfig {
    int iterations = 2000;
    int min_iterations = 300;
    double learning_rate = 0.02;
    int lr_decay_iters = 500;
    int mc_samples = 8;
    double family_q = 0.0;  // 0 = use the prior exponent p
    double plateau_tol = 1e-5;
    int plateau_window = 200;
    int eval_mc_samples = 1024;
};

struct ChainConfigJson {
    double step = 0.0;  // 0 = pre-run tuning
    int iterations = 50000;
    int burn_in = 5000;
    int thinning = 10;
};

struct RatesConfig {
    std::vector<long> n_grid = {64, 128, 256, 512, 1024, 2048, 4096};
    int replicates = 5;
};

struct ExperimentConfig {
    ProblemConfig problem;
    PriorConfig prior;
    Theta0Config theta0;
    long data_n = 256;
    ViConfig vi;
    ChainConfigJson chain;
    RatesConfig rates;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int threads = 1;

    static ExperimentConfig from_json(const json& j);
    json to_json() const;
    void validate() const;
};

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
    detail::check_keys(j, "config",
                       {"problem", "prior", "theta0", "data", "vi", "chain", "rates", "seed",
                        "output_dir", "threads"});
    ExperimentConfig c;
    if (j.contains("problem")) {
        const json& p = j.at("problem");
        detail::check_keys(p, "problem",
                           {"kind", "d", "grid_level", "wavelet", "k_min", "source_constant",
                            "m0", "beta", "final_time", "time_steps", "source_level",
                            "boundary"});
        c.problem.kind = detail::get_or<std::string>(p, "kind", c.problem.kind);
        c.problem.d = detail::get_or<int>(p, "d", c.problem.d);
        c.problem.grid_level = detail::get_or<int>(p, "grid_level", c.problem.grid_level);
        c.problem.wavelet = detail::get_or<std::string>(p, "wavelet", c.problem.wavelet);
        c.problem.k_min = detail::get_or<double>(p, "k_min", c.problem.k_min);
        c.problem.source_constant =
            detail::get_or<double>(p, "source_constant", c.problem.source_constant);
        c.problem.m0 = detail::get_or<double>(p, "m0", c.problem.m0);
        c.problem.beta = detail::get_or<double>(p, "beta", c.problem.beta);
        c.problem.final_time = detail::get_or<double>(p, "final_time", c.problem.final_time);
        c.problem.time_steps = detail::get_or<int>(p, "time_steps", c.problem.time_steps);
        c.problem.source_level = detail::get_or<double>(p, "source_level", c.problem.source_level);
        c.problem.boundary = detail::get_or<double>(p, "boundary", c.problem.boundary);
    }
    if (j.contains("prior")) {
        const json& p = j.at("prior");
        detail::check_keys(p, "prior", {"p", "alpha", "kappa", "scaling", "rho", "truncation", "J"});
        c.prior.p = detail::get_or<double>(p, "p", c.prior.p);
        c.prior.alpha = detail::get_or<double>(p, "alpha", c.prior.alpha);
        c.prior.kappa = detail::get_or<double>(p, "kappa", c.prior.kappa);
        c.prior.scaling = detail::get_or<std::string>(p, "scaling", c.prior.scaling);
        c.prior.rho = detail::get_or<double>(p, "rho", c.prior.rho);
        c.prior.truncation = detail::get_or<std::string>(p, "truncation", c.prior.truncation);
        c.prior.j = detail::get_or<int>(p, "J", c.prior.j);
    }
    if (j.contains("theta0")) {
        const json& p = j.at("theta0");
        detail::check_keys(p, "theta0", {"kind", "amplitude"});
        c.theta0.kind = detail::get_or<std::string>(p, "kind", c.theta0.kind);
        c.theta0.amplitude = detail::get_or<double>(p, "amplitude", c.theta0.amplitude);
    }
    if (j.contains("data")) {
        const json& p = j.at("data");
        detail::check_keys(p, "data", {"N"});
        c.data_n = detail::get_or<long>(p, "N", c.data_n);
    }
    if (j.contains("vi")) {
        const json& p = j.at("vi");
        detail::check_keys(p, "vi",
                           {"iterations", "min_iterations", "learning_rate", "lr_decay_iters",
                            "mc_samples", "family_q", "plateau_tol", "plateau_window",
                            "eval_mc_samples"});
        c.vi.iterations = detail::get_or<int>(p, "iterations", c.vi.iterations);
        c.vi.min_iterations = detail::get_or<int>(p, "min_iterations", c.vi.min_iterations);
        c.vi.learning_rate = detail::get_or<double>(p, "learning_rate", c.vi.learning_rate);
        c.vi.lr_decay_iters = detail::get_or<int>(p, "lr_decay_iters", c.vi.lr_decay_iters);
        c.vi.mc_samples = detail::get_or<int>(p, "mc_samples", c.vi.mc_samples);
        c.vi.family_q = detail::get_or<double>(p, "family_q", c.vi.family_q);
        c.vi.plateau_tol = detail::get_or<double>(p, "plateau_tol", c.vi.plateau_tol);
        c.vi.plateau_window = detail::get_or<int>(p, "plateau_window", c.vi.plateau_window);
        c.vi.eval_mc_samples = detail::get_or<int>(p, "eval_mc_samples", c.vi.eval_mc_samples);
    }
    if (j.contains("chain")) {
        const json& p = j.at("chain");
        detail::check_keys(p, "chain", {"step", "iterations", "burn_in", "thinning"});
        c.chain.step = detail::get_or<double>(p, "step", c.chain.step);
        c.chain.iterations = detail::get_or<int>(p, "iterations", c.chain.iterations);
        c.chain.burn_in = detail::get_or<int>(p, "burn_in", c.chain.burn_in);
        c.chain.thinning = detail::get_or<int>(p, "thinning", c.chain.thinning);
    }
    if (j.contains("rates")) {
        const json& p = j.at("rates");
        detail::check_keys(p, "rates", {"n_grid", "replicates"});
        c.rates.n_grid = detail::get_or<std::vector<long>>(p, "n_grid", c.rates.n_grid);
        c.rates.replicates = detail::get_or<int>(p, "replicates", c.rates.replicates);
    }
    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
    c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir);
    c.threads = detail::get_or<int>(j, "threads", c.threads);
    c.validate();
    return c;
}

inline void ExperimentConfig::validate() const {
    if (problem.kind != "darcy" && problem.kind != "subdiffusion" && problem.kind != "linear-toy")
        throw ConfigError("problem.kind must be darcy | subdiffusion | linear-toy");
    if (problem.d != 1 && problem.d != 2) throw ConfigError("problem.d must be 1 or 2");
    if (problem.kind == "subdiffusion" && problem.d != 1)
        throw ConfigError("subdiffusion supports d = 1 only");
    if (problem.grid_level < 2 || problem.grid_level > 14)
        throw ConfigError("problem.grid_level must lie in [2, 14]");
    if (problem.wavelet != "haar" && problem.wavelet != "db4")
        throw ConfigError("problem.wavelet must be haar | db4");
    if (prior.scaling != "rescale" && prior.scaling != "fixed")
        throw ConfigError("prior.scaling must be rescale | fixed");
    if (prior.truncation != "rescale" && prior.truncation != "fixed" && prior.truncation != "none")
        throw ConfigError("prior.truncation must be rescale | fixed | none");
    if (theta0.kind != "smooth-bump" && theta0.kind != "zero")
        throw ConfigError("theta0.kind must be smooth-bump | zero");
    if (data_n < 0) throw ConfigError("data.N must be >= 0");
    if (rates.n_grid.size() < 1) throw ConfigError("rates.n_grid must be non-empty");
    if (rates.replicates < 1) throw ConfigError("rates.replicates must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

inline json ExperimentConfig::to_json() const {
    json j;
    j["problem"] = {{"kind", problem.kind},
                    {"d", problem.d},
                    {"grid_level", problem.grid_level},
                    {"wavelet", problem.wavelet},
                    {"k_min", problem.k_min},
                    {"source_constant", problem.source_constant},
                    {"m0", problem.m0},
                    {"beta", problem.beta},
                    {"final_time", problem.final_time},
                    {"time_steps", problem.time_steps},
                    {"source_level", problem.source_level},
                    {"boundary", problem.boundary}};
    j["prior"] = {{"p", prior.p},         {"alpha", prior.alpha},
                  {"kappa", prior.kappa}, {"scaling", prior.scaling},
                  {"rho", prior.rho},     {"truncation", prior.truncation},
                  {"J", prior.j}};
    j["theta0"] = {{"kind", theta0.kind}, {"amplitude", theta0.amplitude}};
    j["data"] = {{"N", data_n}};
    j["vi"] = {{"iterations", vi.iterations},
               {"min_iterations", vi.min_iterations},
               {"learning_rate", vi.learning_rate},
               {"lr_decay_iters", vi.lr_decay_iters},
               {"mc_samples", vi.mc_samples},
               {"family_q", vi.family_q},
               {"plateau_tol", vi.plateau_tol},
               {"plateau_window", vi.plateau_window},
               {"eval_mc_samples", vi.eval_mc_samples}};
    j["chain"] = {{"step", chain.step},
                  {"iterations", chain.iterations},
                  {"burn_in", chain.burn_in},
                  {"thinning", chain.thinning}};
    j["rates"] = {{"n_grid", rates.n_grid}, {"replicates", rates.replicates}};
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["threads"] = threads;
    return j;
}

/// Components of one assembled experiment instance.
struct Instance {
    WaveletBasis basis;
    BesovPrior prior;
    ForwardMap map;
    CoeffTree theta0;
};

inline WaveletBasis make_basis(const ExperimentConfig& c) {
    WaveletFamily fam =
        c.problem.wavelet == "haar" ? WaveletFamily::haar : WaveletFamily::daubechies4;
    return WaveletBasis(c.problem.d, fam, c.problem.grid_level);
}

inline CoeffTree make_theta0(const ExperimentConfig& c, const WaveletBasis& basis) {
    if (c.theta0.kind == "zero") return CoeffTree(basis);
    auto bump = [](double x) {
        double s = (x - 0.5) / 0.25;  // supported in K = [0.25, 0.75]
        if (std::fabs(s) >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - s * s));
    };
    std::size_t n = basis.grid_size();
    std::vector<double> field(basis.grid_points());
    if (basis.dim() == 1) {
        for (std::size_t i = 0; i < n; ++i)
            field[i] = c.theta0.amplitude * bump(basis.coordinate(i));
    } else {
        for (std::size_t iy = 0; iy < n; ++iy)
            for (std::size_t ix = 0; ix < n; ++ix)
                field[iy * n + ix] = c.theta0.amplitude * bump(basis.coordinate(iy)) *
                                     bump(basis.coordinate(ix));
    }
    return analyze(field, basis);
}

/// Prior for a given data size N (the scaling/truncation may be N-dependent).
inline BesovPrior make_prior(const ExperimentConfig& c, const WaveletBasis& basis, long n_data) {
    double rho = c.prior.rho;
    int suggested_j = c.prior.j;
    if (c.prior.scaling == "rescale" || c.prior.truncation == "rescale") {
        RescalingResult r = rescale_for_n(c.prior.alpha, c.prior.kappa, c.problem.d, c.prior.p,
                                          std::max<long>(n_data, 1));
        if (c.prior.scaling == "rescale") rho = r.rho;
        if (c.prior.truncation == "rescale") suggested_j = r.truncation_level;
    }
    std::optional<int> trunc;
    if (c.prior.truncation != "none")
        trunc = std::clamp(suggested_j, -1, basis.max_detail_level());
    BesovPriorSpec spec(c.prior.p, c.prior.alpha, c.problem.d, rho, trunc);
    return BesovPrior(spec, basis);
}

inline ForwardMap make_map(const ExperimentConfig& c, const WaveletBasis& basis) {
    if (c.problem.kind == "linear-toy") return ForwardMap::linear_toy(basis);
    if (c.problem.kind == "darcy") {
        std::vector<double> g(basis.grid_points(), c.problem.source_constant);
        DarcyProblem prob(c.problem.d, basis.grid_size(), std::move(g), c.problem.k_min);
        return ForwardMap::darcy(basis, std::move(prob), LinkFunction::darcy(c.problem.k_min));
    }
    std::vector<double> f(basis.grid_points(), c.problem.source_level);
    std::vector<double> u0(basis.grid_points(), c.problem.boundary);
    SubdiffusionProblem prob(basis.grid_size(), static_cast<std::size_t>(c.problem.time_steps),
                             c.problem.beta, c.problem.final_time, std::move(f), std::move(u0),
                             c.problem.boundary, c.problem.boundary, c.problem.m0);
    return ForwardMap::subdiffusion(basis, std::move(prob), LinkFunction::logistic(c.problem.m0));
}

inline Instance make_instance(const ExperimentConfig& c, long n_data) {
    WaveletBasis basis = make_basis(c);
    return Instance{basis, make_prior(c, basis, n_data), make_map(c, basis),
                    make_theta0(c, basis)};
}

inline FitConfig make_fit_config(const ExperimentConfig& c) {
    FitConfig f;
    f.max_iterations = static_cast<std::size_t>(c.vi.iterations);
    f.min_iterations = static_cast<std::size_t>(c.vi.min_iterations);
    f.learning_rate = c.vi.learning_rate;
    f.lr_decay_iters = static_cast<std::size_t>(c.vi.lr_decay_iters);
    f.mc_samples = static_cast<std::size_t>(c.vi.mc_samples);
    f.plateau_rel_tol = c.vi.plateau_tol;
    f.plateau_window = static_cast<std::size_t>(c.vi.plateau_window);
    return f;
}

/// Minimal shared-queue worker pool; results land in caller-owned slots so
/// output order stays deterministic.
inline void run_parallel(std::size_t n_tasks, int threads,
                         const std::function<void(std::size_t)>& task) {
    if (threads <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            task(i);
        }
    };
    std::vector<std::thread> pool;
    int k = std::min<int>(threads, static_cast<int>(n_tasks));
    pool.reserve(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

struct RateRow {
    long n = 0;
    int replicate = 0;
    double eps_n = 0.0;
    double pred_error = 0.0;   // ||G(theta-hat draws) - G(theta0)|| (posterior mean of tau=2, sqrt)
    double param_error = 0.0;  // ||f_theta - f_0||
    double r_value = 0.0;      // R(Q-hat)
    double wall_s = 0.0;
    bool ok = false;
    std::string error;
};

struct RateResult {
    std::vector<RateRow> rows;
    json summary;
};

inline std::string rate_table_csv(const std::vector<RateRow>& rows) {
    std::ostringstream os;
    os << "N,replicate,eps_N,pred_error,param_error,R,wall_time_s,status\n";
    for (const RateRow& r : rows) {
        os << r.n << ',' << r.replicate << ',' << detail::fmt17(r.eps_n) << ','
           << detail::fmt17(r.pred_error) << ',' << detail::fmt17(r.param_error) << ','
           << detail::fmt17(r.r_value) << ',' << detail::fmt17(r.wall_s) << ','
           << (r.ok ? "ok" : ("failed:" + r.error)) << '\n';
    }
    return os.str();
}

/// Slope of log(median error) against log N, with the sqrt(log N)-corrected
/// variant reported alongside.
inline json rate_slopes(const std::vector<long>& ns, const std::vector<double>& medians) {
    std::vector<double> lx, ly, ly_corr;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (!(medians[i] > 0.0)) continue;
        lx.push_back(std::log(static_cast<double>(ns[i])));
        ly.push_back(std::log(medians[i]));
        ly_corr.push_back(std::log(medians[i] / std::sqrt(std::log(static_cast<double>(ns[i])))));
    }
    json out;
    if (lx.size() >= 2) {
        math::LineFit fit = math::ols(lx, ly);
        out["slope"] = fit.slope;
        out["slope_stderr"] = fit.slope_stderr;
        out["slope_ci95_halfwidth"] = fit.slope_ci_halfwidth;
        out["r_squared"] = fit.r_squared;
        out["log_corrected_slope"] = math::ols(lx, ly_corr).slope;
    } else {
        out["slope"] = nullptr;
    }
    return out;
}

/// The contraction-rate experiment: for each (N, replicate) simulate, fit,
/// evaluate the posterior functionals and R; failures flag the row and the
/// slope fit runs over the survivors.
inline RateResult run_rates(const ExperimentConfig& cfg) {
    if (cfg.rates.n_grid.size() < 4)
        throw ConfigError("rates: N grid needs at least 4 points");
    {
        auto [lo, hi] = std::minmax_element(cfg.rates.n_grid.begin(), cfg.rates.n_grid.end());
        if (*hi < 4 * *lo) throw ConfigError("rates: N grid must span at least two octaves");
    }

    const std::size_t cells = cfg.rates.n_grid.size() * static_cast<std::size_t>(cfg.rates.replicates);
    std::vector<RateRow> rows(cells);
    WaveletBasis basis = make_basis(cfg);
    ForwardMap map = make_map(cfg, basis);
    CoeffTree theta0 = make_theta0(cfg, basis);
    FitConfig fit_cfg = make_fit_config(cfg);

    run_parallel(cells, cfg.threads, [&](std::size_t cell) {
        auto t0 = std::chrono::steady_clock::now();
        std::size_t ni = cell / static_cast<std::size_t>(cfg.rates.replicates);
        int rep = static_cast<int>(cell % static_cast<std::size_t>(cfg.rates.replicates));
        long n = cfg.rates.n_grid[ni];
        RateRow& row = rows[cell];
        row.n = n;
        row.replicate = rep;
        try {
            RescalingResult rs =
                rescale_for_n(cfg.prior.alpha, cfg.prior.kappa, cfg.problem.d, cfg.prior.p, n);
            row.eps_n = rs.eps_n;
            BesovPrior prior = make_prior(cfg, basis, n);
            std::uint64_t cell_seed = math::splitmix64(
                cfg.seed ^ math::splitmix64(static_cast<std::uint64_t>(n)) ^
                math::splitmix64(0x9000ULL + static_cast<std::uint64_t>(rep)));
            Dataset data = simulate(theta0, map, static_cast<std::size_t>(n), cell_seed,
                                    cfg.theta0.kind);
            math::Rng fit_rng = math::Rng::substream(cell_seed, {0xf17ULL});
            double q = cfg.vi.family_q > 0.0 ? cfg.vi.family_q : cfg.prior.p;
            FitReport fr = fit(data, prior, map, q, fit_cfg, fit_rng, cell_seed);
            math::Rng eval_rng = math::Rng::substream(cell_seed, {0xe7a1ULL});
            PosteriorFunctionals pf = posterior_functionals(
                fr.params, prior, theta0, map, 2.0,
                static_cast<std::size_t>(cfg.vi.eval_mc_samples), eval_rng);
            math::Rng r_rng = math::Rng::substream(cell_seed, {0x0a12ULL});
            row.r_value = evaluate_r(fr.params, prior, theta0, map, static_cast<std::size_t>(n),
                                     static_cast<std::size_t>(cfg.vi.eval_mc_samples) / 4 + 1,
                                     r_rng);
            row.pred_error = std::sqrt(pf.pred_error_sq);
            row.param_error = std::sqrt(pf.param_error_sq);
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        row.wall_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    std::vector<double> med_pred, med_param;
    std::vector<long> ns_ok;
    for (std::size_t ni = 0; ni < cfg.rates.n_grid.size(); ++ni) {
        std::vector<double> preds, params;
        for (int rep = 0; rep < cfg.rates.replicates; ++rep) {
            const RateRow& r = rows[ni * static_cast<std::size_t>(cfg.rates.replicates) +
                                    static_cast<std::size_t>(rep)];
            if (r.ok) {
                preds.push_back(r.pred_error);
                params.push_back(r.param_error);
            }
        }
        if (!preds.empty()) {
            ns_ok.push_back(cfg.rates.n_grid[ni]);
            med_pred.push_back(math::median(preds));
            med_param.push_back(math::median(params));
        }
    }

    double theo = -(cfg.prior.alpha + cfg.prior.kappa) /
                  (2.0 * cfg.prior.alpha + 2.0 * cfg.prior.kappa + cfg.problem.d);
    json summary;
    summary["theoretical_exponent"] = theo;
    summary["n_values"] = ns_ok;
    summary["median_prediction_error"] = med_pred;
    summary["median_parameter_error"] = med_param;
    summary["prediction"] = rate_slopes(ns_ok, med_pred);
    summary["parameter"] = rate_slopes(ns_ok, med_param);
    summary["replicates"] = cfg.rates.replicates;
    std::size_t failed = 0;
    for (const RateRow& r : rows)
        if (!r.ok) ++failed;
    summary["failed_cells"] = failed;
    summary["config"] = cfg.to_json();
    return {std::move(rows), std::move(summary)};
}

} // namespace bvi
