#include "catch_amalgamated.hpp"

#include "tamed/error.hpp"
#include "tamed/error_lab.hpp"
#include "tamed/rng.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace tamed;
using Catch::Approx;

namespace {

SchemeRun synthetic_run(std::uint64_t seed, std::size_t steps, double offset) {
    SchemeRun r;
    r.config.h = 1.0 / static_cast<double>(steps);
    r.dim = 1;
    r.seed = seed;
    for (std::size_t k = 0; k <= steps; ++k) {
        r.x_values.push_back(std::sin(static_cast<double>(k + seed)) + offset);
        r.k_values.push_back(0.0);
    }
    return r;
}

ErrorSample power_law_sample(double h, double c, double rate) {
    ErrorSample s;
    s.h = h;
    s.sup_error_lm = c * std::pow(h, rate);
    s.n_paths = 10;
    return s;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tamed_error_lab_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("identical runs have zero strong error", "[error_lab]") {
    std::vector<SchemeRun> runs;
    for (std::uint64_t i = 0; i < 5; ++i) runs.push_back(synthetic_run(i, 16, 0.0));
    const ErrorSample s = strong_error(runs, runs, 2);
    CHECK(s.sup_error_lm == 0.0);
    CHECK(s.std_error == 0.0);
    CHECK(s.n_paths == 5);
}

TEST_CASE("constant deviation c gives error |c| and zero standard error", "[error_lab]") {
    std::vector<SchemeRun> ref, coarse;
    for (std::uint64_t i = 0; i < 8; ++i) {
        ref.push_back(synthetic_run(i, 32, 0.0));
        coarse.push_back(synthetic_run(i, 32, -0.25));
    }
    for (int m : {1, 2, 4}) {
        const ErrorSample s = strong_error(coarse, ref, m);
        CHECK(s.sup_error_lm == Approx(0.25).epsilon(1e-15));
        CHECK(s.std_error == 0.0);
    }
}

TEST_CASE("sup over the coarse grid of a finer reference", "[error_lab]") {
    SchemeRun ref = synthetic_run(3, 8, 0.0);
    SchemeRun coarse = synthetic_run(3, 4, 0.0);
    for (std::size_t k = 0; k <= 4; ++k) coarse.x_values[k] = ref.x_values[2 * k];
    coarse.x_values[3] += 0.125;
    CHECK(path_sup_deviation(coarse, ref) == Approx(0.125).epsilon(1e-15));
}

TEST_CASE("uncoupled runs are rejected", "[error_lab]") {
    std::vector<SchemeRun> a = {synthetic_run(1, 8, 0.0), synthetic_run(2, 8, 0.0)};
    std::vector<SchemeRun> b = {synthetic_run(1, 8, 0.0), synthetic_run(7, 8, 0.0)};
    try {
        strong_error(a, b, 2);
        FAIL("expected UncoupledRuns");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UncoupledRuns);
    }
}

TEST_CASE("non-finite moments are reported", "[error_lab]") {
    const std::vector<double> dev = {1.0, 1e200};
    try {
        summarize_deviations(0.1, 1, dev, 2);
        FAIL("expected MomentOverflow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MomentOverflow);
    }
}

TEST_CASE("delta-method standard error", "[error_lab]") {
    // e = {1, 3}: mean of squares 5, variance of squares 32, se = sqrt5/(2*5) * sqrt(32/2)
    const std::vector<double> dev = {1.0, 3.0};
    const ErrorSample s = summarize_deviations(0.5, 2, dev, 2);
    CHECK(s.sup_error_lm == Approx(std::sqrt(5.0)).epsilon(1e-15));
    CHECK(s.std_error == Approx(std::sqrt(5.0) / 10.0 * 4.0).epsilon(1e-14));
}

TEST_CASE("regression recovers exact power laws", "[error_lab]") {
    std::vector<ErrorSample> linear, root;
    for (int k = 6; k <= 10; ++k) {
        const double h = std::ldexp(1.0, -k);
        linear.push_back(power_law_sample(h, 1.0, 1.0));
        root.push_back(power_law_sample(h, 3.0, 0.5));
    }
    const RateReport a = rate_regression(linear, 0.5);
    CHECK(a.slope == Approx(1.0).margin(1e-12));
    CHECK(a.slope_stderr <= 1e-12);
    CHECK(a.theoretical == 0.5);
    const RateReport b = rate_regression(root, 0.5);
    CHECK(b.slope == Approx(0.5).margin(1e-12));
    CHECK(b.intercept == Approx(std::log(3.0)).margin(1e-12));
}

TEST_CASE("regression needs three distinct step sizes", "[error_lab]") {
    std::vector<ErrorSample> two = {power_law_sample(0.1, 1, 1), power_law_sample(0.05, 1, 1),
                                    power_law_sample(0.05, 1, 1)};
    try {
        rate_regression(two, 0.5);
        FAIL("expected DegenerateDesign");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateDesign);
    }
    std::vector<ErrorSample> zero = {power_law_sample(0.1, 0, 1), power_law_sample(0.05, 1, 1),
                                     power_law_sample(0.025, 1, 1)};
    CHECK_THROWS_AS(rate_regression(zero, 0.5), Error);
}

TEST_CASE("error table emission and round trip", "[error_lab][io]") {
    std::vector<ErrorSample> samples;
    for (int k = 6; k <= 9; ++k) {
        ErrorSample s = power_law_sample(std::ldexp(1.0, -k), 0.7, 0.5);
        s.n = 1u << k;
        s.m = 2;
        s.n_paths = 2000;
        s.std_error = s.sup_error_lm / 3.0;  // not representable in few digits
        samples.push_back(s);
    }
    const RateReport report = rate_regression(samples, 0.5);
    const auto dir = scratch("emit");
    const auto files = error_table_emit(report, {"dirac", 0.2, 42}, dir, "dirac_H0.2");

    const std::string csv = read_file(files.csv);
    std::istringstream lines(csv);
    std::string line;
    std::size_t count = 0;
    std::getline(lines, line);
    CHECK(line == "h,n,m,n_paths,sup_error,stderr");
    while (std::getline(lines, line)) ++count;
    CHECK(count == 4);

    const auto parsed = parse_error_table(csv);
    REQUIRE(parsed.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(parsed[i].h == samples[i].h);
        CHECK(parsed[i].n == samples[i].n);
        CHECK(parsed[i].m == samples[i].m);
        CHECK(parsed[i].n_paths == samples[i].n_paths);
        CHECK(parsed[i].sup_error_lm == samples[i].sup_error_lm);
        CHECK(parsed[i].std_error == samples[i].std_error);
    }

    const std::string json = read_file(files.json);
    const auto summary = parse_rate_summary(json);
    CHECK(summary.slope == report.slope);
    CHECK(summary.slope_stderr == report.slope_stderr);
    CHECK(summary.intercept == report.intercept);
    CHECK(summary.theoretical_rate == 0.5);
    CHECK(summary.meta.drift == "dirac");
    CHECK(summary.meta.hurst == 0.2);
    CHECK(summary.meta.seed == 42);
    // fixed key order
    const auto pos = [&](const char* key) { return json.find(std::string("\"") + key + "\""); };
    CHECK(pos("slope") < pos("slope_stderr"));
    CHECK(pos("slope_stderr") < pos("intercept"));
    CHECK(pos("intercept") < pos("theoretical_rate"));
    CHECK(pos("theoretical_rate") < pos("drift"));
    CHECK(pos("hurst") < pos("seed"));
    CHECK_FALSE(std::filesystem::exists(files.csv.string() + ".tmp"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed error tables are rejected", "[error_lab][io]") {
    CHECK_THROWS_AS(parse_error_table("h,n\n"), Error);
    CHECK_THROWS_AS(parse_error_table("h,n,m,n_paths,sup_error,stderr\n0.1,2,2,10,abc,0\n"), Error);
    CHECK_THROWS_AS(parse_error_table("h,n,m,n_paths,sup_error,stderr\n0.1,2,2,10\n"), Error);
    CHECK_THROWS_AS(parse_rate_summary("{\"slope\": 1}"), Error);
}

TEST_CASE("shortest round-trip formatting", "[error_lab][io]") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(0.015625) == "0.015625");
    const double third = 1.0 / 3.0;
    CHECK(std::stod(format_double(third)) == third);
}

namespace {

struct CoupledStudy {
    std::vector<double> steps;
    std::vector<std::vector<double>> deviations;  // [step][path]
};

CoupledStudy dirac_study(std::size_t n_paths, double h_ref, std::vector<double> steps) {
    const auto spec = DriftSpec::dirac({1.0});
    const HurstParameter H(0.2);
    const FbmGenerator gen(H, static_cast<std::size_t>(1.0 / h_ref), 1);
    const MollifiedDrift ref_drift(spec, coupling_n(h_ref, spec));
    const SchemeConfig ref_cfg = make_scheme_config(spec, h_ref, ref_drift.n(), {0.0}, H);
    CoupledStudy study{steps, std::vector<std::vector<double>>(steps.size(), std::vector<double>(n_paths))};
    for (std::size_t i = 0; i < n_paths; ++i) {
        const FbmPath p = gen.sample(stream_seed(5, 0, i));
        const SchemeRun ref = run_scheme(ref_drift, ref_cfg, p);
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const std::uint64_t n = coupling_n(steps[k], spec);
            const SchemeRun c = run_scheme(MollifiedDrift(spec, n), make_scheme_config(spec, steps[k], n, {0.0}, H), p);
            study.deviations[k][i] = path_sup_deviation(c, ref);
        }
    }
    return study;
}

}  // namespace

TEST_CASE("strong error is non-decreasing in the moment order", "[error_lab][statistics]") {
    const auto study = dirac_study(300, 1.0 / 4096, {1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256});
    for (std::size_t k = 0; k < study.steps.size(); ++k) {
        const double e1 = summarize_deviations(study.steps[k], 0, study.deviations[k], 1).sup_error_lm;
        const double e2 = summarize_deviations(study.steps[k], 0, study.deviations[k], 2).sup_error_lm;
        const double e4 = summarize_deviations(study.steps[k], 0, study.deviations[k], 4).sup_error_lm;
        CHECK(e1 <= e2);
        CHECK(e2 <= e4);
    }
}

TEST_CASE("strong error decreases along the dyadic family", "[error_lab][statistics]") {
    const auto study = dirac_study(300, 1.0 / 4096, {1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256});
    std::vector<ErrorSample> samples;
    for (std::size_t k = 0; k < study.steps.size(); ++k) {
        samples.push_back(summarize_deviations(study.steps[k], 0, study.deviations[k], 2));
    }
    int inversions = 0;
    for (std::size_t k = 1; k < samples.size(); ++k) {
        if (samples[k].sup_error_lm > samples[k - 1].sup_error_lm) {
            ++inversions;
            const double band = 2.0 * std::hypot(samples[k].std_error, samples[k - 1].std_error);
            CHECK(samples[k].sup_error_lm - samples[k - 1].sup_error_lm <= band);
        }
    }
    CHECK(inversions <= 1);
}

TEST_CASE("strong error matches a two-pass recomputation from stored trajectories", "[error_lab][statistics]") {
    const auto spec = DriftSpec::dirac({1.0});
    const HurstParameter H(0.2);
    const double h = 1.0 / 64;
    const double h_ref = 1.0 / 16384;
    const std::size_t n_paths = 2000;
    const FbmGenerator gen(H, 16384, 1);
    const MollifiedDrift ref_drift(spec, coupling_n(h_ref, spec));
    const MollifiedDrift coarse_drift(spec, coupling_n(h, spec));
    const SchemeConfig ref_cfg = make_scheme_config(spec, h_ref, ref_drift.n(), {0.0}, H);
    const SchemeConfig coarse_cfg = make_scheme_config(spec, h, coarse_drift.n(), {0.0}, H);

    // store the coarse trajectory and the reference restricted to the coarse grid
    std::vector<SchemeRun> coarse, stored_ref;
    for (std::size_t i = 0; i < n_paths; ++i) {
        const FbmPath p = gen.sample(stream_seed(77, 0, i));
        SchemeRun ref = run_scheme(ref_drift, ref_cfg, p);
        SchemeRun restricted = ref;
        restricted.config = coarse_cfg;
        restricted.x_values.clear();
        restricted.k_values.clear();
        for (std::size_t k = 0; k <= 64; ++k) {
            restricted.x_values.push_back(ref.x(k * 256)[0]);
            restricted.k_values.push_back(ref.k(k * 256)[0]);
        }
        stored_ref.push_back(std::move(restricted));
        coarse.push_back(run_scheme(coarse_drift, coarse_cfg, p));
    }
    const ErrorSample s = strong_error(coarse, stored_ref, 2);

    // pass 1: per-path maxima; pass 2: mean of squares in long double
    std::vector<double> e(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        double worst = 0.0;
        for (std::size_t k = 0; k <= 64; ++k) {
            worst = std::max(worst, std::abs(stored_ref[i].x_values[k] - coarse[i].x_values[k]));
        }
        e[i] = worst;
    }
    long double acc = 0.0L;
    for (double v : e) acc += static_cast<long double>(v) * v;
    const double replay = std::sqrt(static_cast<double>(acc / n_paths));
    CHECK(s.sup_error_lm == Approx(replay).epsilon(1e-12));
    CHECK(s.n_paths == n_paths);
}
