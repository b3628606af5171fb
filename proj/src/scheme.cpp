#include "tamed/scheme.hpp"

#include "tamed/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace tamed {

namespace {

constexpr double kExplosionBound = 1e12;

std::size_t integer_reciprocal(double h) {
    if (!(h > 0.0 && h <= 1.0)) {
        throw Error(ErrorKind::GridMismatch, "step " + std::to_string(h) + " outside (0,1]");
    }
    const double inv = 1.0 / h;
    const double rounded = std::round(inv);
    if (std::abs(inv - rounded) > 1e-9 * rounded) {
        throw Error(ErrorKind::GridMismatch, "1/h = " + std::to_string(inv) + " is not an integer");
    }
    return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t SchemeConfig::steps() const { return integer_reciprocal(h); }

SchemeConfig make_scheme_config(const DriftSpec& spec, double h, std::uint64_t n,
                                std::vector<double> x0, HurstParameter hurst,
                                double taming_reference_h) {
    SchemeConfig config{h, n, std::move(x0), hurst, false};
    if (config.x0.size() != spec.dim()) {
        throw Error(ErrorKind::GridMismatch, "x0 dimension does not match the drift");
    }
    config.untamed = check_taming_condition(spec, hurst, h, n, taming_reference_h).flagged;
    return config;
}

std::uint64_t coupling_n(double h, const DriftSpec& spec) {
    if (!(h > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "step must be positive");
    }
    if (h >= 0.5) {
        throw Error(ErrorKind::StepTooLarge, "coupling needs h < 1/2, got " + std::to_string(h));
    }
    const double r = spec.besov().effective_regularity();
    if (r > 1e-12) {
        throw Error(ErrorKind::PositiveRegularity, "coupling needs gamma - d/p <= 0");
    }
    return coupled_level(std::min(r, 0.0), h);
}

SchemeRun run_scheme(const MollifiedDrift& drift, const SchemeConfig& config, const FbmPath& path) {
    const std::size_t steps = config.steps();
    const std::size_t d = drift.dim();
    if (path.dim != d || config.x0.size() != d) {
        throw Error(ErrorKind::GridMismatch, "dimension mismatch between drift, x0 and path");
    }
    if (path.n_steps < steps || path.n_steps % steps != 0) {
        throw Error(ErrorKind::GridMismatch, "path grid (" + std::to_string(path.n_steps) +
                                                 " steps) does not refine the scheme grid (" +
                                                 std::to_string(steps) + " steps)");
    }
    const std::size_t stride = path.n_steps / steps;
    const double h = config.h;

    SchemeRun run;
    run.config = config;
    run.dim = d;
    run.seed = path.seed;
    run.path_n_steps = path.n_steps;
    run.x_values.resize((steps + 1) * d);
    run.k_values.assign((steps + 1) * d, 0.0);
    std::copy(config.x0.begin(), config.x0.end(), run.x_values.begin());

    std::vector<double> b(d);
    for (std::size_t k = 0; k < steps; ++k) {
        const double* xk = run.x_values.data() + k * d;
        drift.eval({xk, d}, b);
        const auto noise = path.row((k + 1) * stride);
        double* xn = run.x_values.data() + (k + 1) * d;
        const double* kk = run.k_values.data() + k * d;
        double* kn = run.k_values.data() + (k + 1) * d;
        for (std::size_t j = 0; j < d; ++j) {
            const double increment = h * b[j];
            if (!std::isfinite(increment)) {
                throw Error(ErrorKind::NonFiniteState,
                            "drift produced a non-finite value at step " + std::to_string(k));
            }
            kn[j] = kk[j] + increment;
            xn[j] = config.x0[j] + kn[j] + noise[j];
            if (!(std::abs(xn[j]) <= kExplosionBound)) {
                throw Error(ErrorKind::NonFiniteState,
                            "state left |X| <= 1e12 at step " + std::to_string(k + 1));
            }
        }
    }
    return run;
}

SchemeRun run_reference(const DriftSpec& spec, double h_ref, const FbmPath& path,
                        std::vector<double> x0, HurstParameter hurst) {
    const std::uint64_t n = coupling_n(h_ref, spec);
    const SchemeConfig config = make_scheme_config(spec, h_ref, n, std::move(x0), hurst);
    if (path.n_steps != config.steps()) {
        throw Error(ErrorKind::GridMismatch, "reference path must be sampled at resolution h_ref");
    }
    return run_scheme(MollifiedDrift(spec, n), config, path);
}

double holder_seminorm(const SchemeRun& run, double exponent) {
    if (!(exponent > 0.0 && exponent <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "Hoelder exponent must lie in (0,1]");
    }
    const std::size_t steps = run.steps();
    const std::size_t d = run.dim;
    // (lag h)^exponent depends only on the lag.
    std::vector<double> denominators(steps + 1);
    for (std::size_t lag = 1; lag <= steps; ++lag) {
        denominators[lag] = std::pow(run.config.h * static_cast<double>(lag), exponent);
    }
    double best = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
        const double* ks = run.k_values.data() + s * d;
        for (std::size_t t = s + 1; t <= steps; ++t) {
            const double* kt = run.k_values.data() + t * d;
            double norm_sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = kt[j] - ks[j];
                norm_sq += diff * diff;
            }
            best = std::max(best, std::sqrt(norm_sq) / denominators[t - s]);
        }
    }
    return best;
}

}  // namespace tamed
