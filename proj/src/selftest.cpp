#include "tamed/selftest.hpp"

#include "tamed/error.hpp"
#include "tamed/oracles.hpp"
#include "tamed/rng.hpp"
#include "tamed/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <utility>

namespace tamed {

namespace {

std::size_t reciprocal(double h) {
    return static_cast<std::size_t>(std::llround(1.0 / h));
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream out;
    out.precision(digits);
    out << v;
    return out.str();
}

}  // namespace

BrownianSanity brownian_sanity(const DriftSpec& spec, double h, std::size_t n_paths, std::uint64_t seed) {
    if (!std::holds_alternative<SmoothDrift>(spec.kind())) {
        throw Error(ErrorKind::InvalidArgument, "brownian sanity check needs a smooth Lipschitz drift");
    }
    const HurstParameter brownian(0.5);
    const std::uint64_t n = coupling_n(h, spec);
    const MollifiedDrift drift(spec, n);
    const std::vector<double> x0(spec.dim(), 0.5);
    const SchemeConfig config = make_scheme_config(spec, h, n, x0, brownian);
    const FbmGenerator generator(brownian, reciprocal(h), spec.dim());
    const VectorField field = [&drift](std::span<const double> x, std::span<double> out) { drift.eval(x, out); };

    BrownianSanity result;
    result.n_paths = n_paths;
    for (std::size_t i = 0; i < n_paths; ++i) {
        const FbmPath path = generator.sample(stream_seed(seed, 0, i));
        const SchemeRun run = run_scheme(drift, config, path);
        const std::vector<double> textbook = oracle::textbook_euler(field, path, x0);
        for (std::size_t k = 0; k < textbook.size(); ++k) {
            result.max_deviation = std::max(result.max_deviation, std::abs(run.x_values[k] - textbook[k]));
            result.max_state = std::max(result.max_state, std::abs(textbook[k]));
        }
    }
    return result;
}

OuOrderStudy ou_strong_order(double hurst, double theta, double x0, const std::vector<double>& h_list,
                             double h_ref, std::size_t n_paths, std::uint64_t seed, int m) {
    const HurstParameter H(hurst);
    const DriftSpec spec = DriftSpec::linear(theta);
    const std::size_t fine_steps = reciprocal(h_ref);
    const FbmGenerator generator(H, fine_steps, 1);

    std::vector<MollifiedDrift> drifts;
    std::vector<SchemeConfig> configs;
    for (double h : h_list) {
        const std::uint64_t n = coupling_n(h, spec);
        drifts.emplace_back(spec, n);
        configs.push_back(make_scheme_config(spec, h, n, {x0}, H));
    }

    std::vector<std::vector<double>> deviations(h_list.size(), std::vector<double>(n_paths));
    for (std::size_t i = 0; i < n_paths; ++i) {
        const FbmPath path = generator.sample(stream_seed(seed, 0, i));
        const std::vector<double> exact = oracle::fractional_ou_exact(path, x0, theta);
        for (std::size_t k = 0; k < h_list.size(); ++k) {
            const SchemeRun run = run_scheme(drifts[k], configs[k], path);
            const std::size_t stride = fine_steps / run.steps();
            double worst = 0.0;
            for (std::size_t j = 0; j <= run.steps(); ++j) {
                worst = std::max(worst, std::abs(exact[j * stride] - run.x(j)[0]));
            }
            deviations[k][i] = worst;
        }
    }

    std::vector<ErrorSample> samples;
    for (std::size_t k = 0; k < h_list.size(); ++k) {
        samples.push_back(summarize_deviations(h_list[k], configs[k].n, deviations[k], m));
    }
    // Additive-noise Euler with a smooth drift: order one is the classical target.
    return {hurst, theta, h_ref, rate_regression(samples, 1.0)};
}

BruteForceStudy bruteforce_equivalence(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> kind_pick(0, 4);
    std::uniform_int_distribution<std::size_t> steps_pick(1, 8);
    std::uniform_int_distribution<std::uint64_t> level_pick(1, 200);

    BruteForceStudy study;
    for (std::size_t c = 0; c < cases; ++c) {
        const int kind = kind_pick(rng);
        DriftSpec spec = kind == 0   ? DriftSpec::dirac({2.0 * unit(rng) - 1.0})
                         : kind == 1 ? DriftSpec::indicator_half_line()
                         : kind == 2 ? DriftSpec::indicator_quadrant()
                         : kind == 3 ? DriftSpec::power_singularity(0.1 + 0.8 * unit(rng))
                                     : DriftSpec::linear(4.0 * unit(rng) - 2.0);
        const HurstParameter H(0.05 + 0.9 * unit(rng));
        const std::size_t steps = steps_pick(rng);
        const std::uint64_t n = level_pick(rng);
        std::vector<double> x0(spec.dim());
        for (double& v : x0) {
            v = 2.0 * unit(rng) - 1.0;
        }
        const FbmPath path = sample_fbm(H, steps, spec.dim(), rng());
        const MollifiedDrift drift(spec, n);
        const SchemeConfig config{1.0 / static_cast<double>(steps), n, x0, H, false};

        const SchemeRun run = run_scheme(drift, config, path);
        const std::vector<double> unrolled = oracle::small_grid_bruteforce(drift, path, x0);
        ++study.cases;
        if (run.x_values != unrolled) {
            if (study.mismatches == 0) {
                study.first_mismatch = "case " + std::to_string(c) + " (" + spec.label() + ", " +
                                       std::to_string(steps) + " steps)";
            }
            ++study.mismatches;
        }
    }
    return study;
}

std::vector<SelftestItem> run_selftest(std::ostream* log) {
    std::vector<SelftestItem> items;
    auto record = [&](SelftestItem item) {
        if (log != nullptr) {
            *log << (item.passed ? "PASS " : "FAIL ") << item.name << ": " << item.detail << '\n' << std::flush;
        }
        items.push_back(std::move(item));
    };

    {
        const double a = fgn_autocovariance(HurstParameter(0.5), 0);
        const double b = fgn_autocovariance(HurstParameter(0.5), 3);
        const double c = fgn_autocovariance(HurstParameter(0.75), 1);
        const bool ok = std::abs(a - 1.0) < 1e-15 && std::abs(b) < 1e-15 && std::abs(c - (std::sqrt(2.0) - 1.0)) < 1e-15;
        record({"fgn autocovariance", ok, "rho(0)=" + fixed(a) + " rho(3)=" + fixed(b) + " rho(1;0.75)=" + fixed(c, 8)});
    }

    const std::vector<std::pair<double, double>> pairs = {
        {0.25, 0.25}, {0.5, 0.5}, {1.0, 1.0}, {0.25, 0.75}, {0.5, 1.0}};
    for (double H : {0.1, 0.25, 0.5}) {
        const auto checks = covariance_self_test(HurstParameter(H), 1024, 10000, pairs, 20240501);
        std::size_t passed = 0;
        double worst = 0.0;
        for (const auto& c : checks) {
            passed += c.within(3.0) ? 1 : 0;
            worst = std::max(worst, std::abs(c.empirical - c.theoretical) / c.std_error);
        }
        record({"fbm covariance H=" + fixed(H), passed == checks.size(),
                std::to_string(passed) + "/" + std::to_string(checks.size()) + " pairs within 3 sigma, worst " +
                    fixed(worst, 3) + " sigma"});
    }

    for (const auto& [name, spec] : {std::pair{"zero", DriftSpec::constant(1, 0.0)},
                                     std::pair{"linear", DriftSpec::linear(1.0)}}) {
        const BrownianSanity s = brownian_sanity(spec, 1.0 / 256.0, 10, 7);
        const double tol = 1e-12 * std::max(1.0, s.max_state);
        record({std::string("textbook Euler agreement (") + name + ")", s.max_deviation <= tol,
                "max deviation " + fixed(s.max_deviation, 3) + " over " + std::to_string(s.n_paths) + " paths"});
    }

    {
        const std::vector<double> steps = {1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512, 1.0 / 1024};
        const OuOrderStudy ou = ou_strong_order(0.5, 1.0, 1.0, steps, 1.0 / 16384, 500, 11);
        const double slope = ou.report.slope;
        record({"OU strong order H=0.5", slope >= 0.85 && slope <= 1.15,
                "slope " + fixed(slope) + " +- " + fixed(ou.report.slope_stderr, 2) + " (target [0.85, 1.15])"});
    }

    {
        const BruteForceStudy bf = bruteforce_equivalence(100, 99);
        record({"unrolled oracle equivalence", bf.mismatches == 0,
                std::to_string(bf.cases - bf.mismatches) + "/" + std::to_string(bf.cases) + " bit-exact" +
                    (bf.mismatches ? ", first mismatch " + bf.first_mismatch : std::string())});
    }
    return items;
}

}  // namespace tamed
