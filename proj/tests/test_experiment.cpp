#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "bvi/experiment.hpp"
#include "bvi/io.hpp"

using namespace bvi;
using nlohmann::json;

TEST_CASE("config: defaults, echo, unknown keys, validation") {
    ExperimentConfig def = ExperimentConfig::from_json(json::object());
    CHECK(def.problem.kind == "darcy");
    CHECK(def.prior.p == 1.0);

    json echo = def.to_json();
    for (const char* key : {"problem", "prior", "theta0", "data", "vi", "chain", "rates",
                            "seed", "output_dir", "threads"})
        CHECK(echo.contains(key));

    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"probelm": {}})")), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"prior": {"alhpa": 2}})")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"problem": {"kind": "heat"}})")),
                    ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json(json::parse(R"({"problem": {"kind": "subdiffusion", "d": 2}})")),
        ConfigError);

    // round trip: echo parses back to an identical echo
    ExperimentConfig back = ExperimentConfig::from_json(echo);
    CHECK(back.to_json() == echo);
}

TEST_CASE("theta0 smooth bump is supported in K") {
    ExperimentConfig cfg = ExperimentConfig::from_json(json::object());
    cfg.problem.grid_level = 7;
    cfg.problem.wavelet = "db4";
    WaveletBasis basis = make_basis(cfg);
    CoeffTree theta0 = make_theta0(cfg, basis);
    std::vector<double> field = synthesize(theta0);
    for (std::size_t i = 0; i < field.size(); ++i) {
        double x = basis.coordinate(i);
        if (x < 0.25 || x > 0.75) CHECK_THAT(field[i], Catch::Matchers::WithinAbs(0.0, 1e-10));
    }
    double peak = field[basis.grid_size() / 2];
    CHECK_THAT(peak, Catch::Matchers::WithinRel(1.0, 0.01));  // amplitude * bump(0) = 1
}

TEST_CASE("prior builder honors scaling and truncation modes") {
    ExperimentConfig cfg = ExperimentConfig::from_json(json::object());
    cfg.problem.grid_level = 8;
    WaveletBasis basis = make_basis(cfg);

    cfg.prior.scaling = "rescale";
    cfg.prior.truncation = "rescale";
    BesovPrior rescaled = make_prior(cfg, basis, 128);
    RescalingResult r = rescale_for_n(cfg.prior.alpha, cfg.prior.kappa, 1, cfg.prior.p, 128);
    CHECK_THAT(rescaled.spec().rho, Catch::Matchers::WithinRel(r.rho, 1e-14));
    CHECK(rescaled.retained_level() == r.truncation_level);

    cfg.prior.scaling = "fixed";
    cfg.prior.rho = 0.37;
    cfg.prior.truncation = "none";
    BesovPrior fixed = make_prior(cfg, basis, 128);
    CHECK(fixed.spec().rho == 0.37);
    CHECK(fixed.retained_level() == basis.max_detail_level());
}

TEST_CASE("slope fitter recovers the exact epsilon_N exponent") {
    // feeding eps_N for alpha=2, kappa=1, d=1 must give slope -3/7
    std::vector<long> ns = {64, 128, 256, 512, 1024, 2048, 4096};
    std::vector<double> eps;
    for (long n : ns) eps.push_back(std::pow(static_cast<double>(n), -3.0 / 7.0));
    json fit = rate_slopes(ns, eps);
    CHECK_THAT(fit["slope"].get<double>(), Catch::Matchers::WithinAbs(-3.0 / 7.0, 1e-6));
    CHECK_THAT(fit["r_squared"].get<double>(), Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("rates experiment on the linear toy: determinism and schema") {
    ExperimentConfig cfg = ExperimentConfig::from_json(json::parse(R"({
        "problem": {"kind": "linear-toy", "grid_level": 5, "wavelet": "haar"},
        "prior": {"p": 2.0, "alpha": 2.0, "kappa": 0.0},
        "vi": {"iterations": 220, "min_iterations": 120, "mc_samples": 4,
                "eval_mc_samples": 64, "learning_rate": 0.05},
        "rates": {"n_grid": [16, 32, 64, 128], "replicates": 2},
        "seed": 3
    })"));

    RateResult a = run_rates(cfg);
    RateResult b = run_rates(cfg);
    // every column except the informational wall-time one is reproducible
    auto strip_wall = [](std::string csv) {
        std::istringstream in(csv);
        std::ostringstream out;
        std::string line;
        while (std::getline(in, line)) {
            std::size_t last = line.rfind(',');
            std::size_t prev = line.rfind(',', last - 1);
            out << line.substr(0, prev) << line.substr(last) << '\n';
        }
        return out.str();
    };
    CHECK(strip_wall(rate_table_csv(a.rows)) == strip_wall(rate_table_csv(b.rows)));
    CHECK(a.summary.dump() == b.summary.dump());

    REQUIRE(a.rows.size() == 8);
    for (const RateRow& row : a.rows) {
        CHECK(row.ok);
        RescalingResult r = rescale_for_n(2.0, 0.0, 1, 2.0, row.n);
        CHECK(row.eps_n == r.eps_n);  // column matches the closed form exactly
        CHECK(row.pred_error > 0.0);
    }

    // golden schema: structure of the summary document
    std::ifstream golden_file(std::string(BVI_TEST_DATA_DIR) + "/rates_summary_schema.json");
    REQUIRE(golden_file.good());
    json golden = json::parse(golden_file);
    std::function<void(const json&, const json&, std::string)> check_schema =
        [&](const json& schema, const json& doc, std::string path) {
            for (auto it = schema.begin(); it != schema.end(); ++it) {
                INFO(path + "/" + it.key());
                REQUIRE(doc.contains(it.key()));
                if (it.value().is_object()) check_schema(it.value(), doc.at(it.key()), path + "/" + it.key());
            }
        };
    check_schema(golden, a.summary, "");
}

TEST_CASE("rates rejects degenerate N grids") {
    ExperimentConfig cfg = ExperimentConfig::from_json(json::object());
    cfg.rates.n_grid = {64, 65, 66, 67};  // not two octaves
    CHECK_THROWS_AS(run_rates(cfg), ConfigError);
    cfg.rates.n_grid = {64, 128, 256};  // fewer than 4 points
    CHECK_THROWS_AS(run_rates(cfg), ConfigError);
}

TEST_CASE("zero-noise self-consistency") {
    // responses set exactly to G(theta0)(X) and a variational law concentrated
    // at theta0: every error functional is tiny
    ExperimentConfig cfg = ExperimentConfig::from_json(json::parse(R"({
        "problem": {"kind": "linear-toy", "grid_level": 5, "wavelet": "haar"},
        "prior": {"p": 2.0, "alpha": 2.0, "kappa": 0.0, "truncation": "none"}
    })"));
    WaveletBasis basis = make_basis(cfg);
    ForwardMap map = make_map(cfg, basis);
    CoeffTree theta0 = make_theta0(cfg, basis);
    BesovPrior prior = make_prior(cfg, basis, 64);

    MeanFieldParams concentrated = prior_params(prior, 2.0);
    for (std::size_t i = 0; i < concentrated.size(); ++i) {
        concentrated.location[i] = theta0.values[i];
        concentrated.scale[i] = MeanFieldParams::b_min;
    }
    math::Rng rng(1);
    PosteriorFunctionals pf = posterior_functionals(concentrated, prior, theta0, map, 2.0, 64, rng);
    CHECK(std::sqrt(pf.pred_error_sq) < 1e-6);
    CHECK(std::sqrt(pf.param_error_sq) < 1e-6);
}

TEST_CASE("worker pool covers all tasks exactly once") {
    std::vector<int> hits(257, 0);
    run_parallel(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}
