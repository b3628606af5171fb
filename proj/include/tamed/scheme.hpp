#pragma once

#include "tamed/drift.hpp"
#include "tamed/fbm.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tamed {

/// Step, mollification level, initial state and Hurst index of one scheme run.
struct SchemeConfig {
    double h = 0.0;
    std::uint64_t n = 1;
    std::vector<double> x0;
    HurstParameter hurst{0.5};
    /// Set when (h, n, H) fails check_taming_condition.
    bool untamed = false;

    /// 1/h; throws GridMismatch if 1/h is not an integer.
    std::size_t steps() const;
};

/// Builds a SchemeConfig and tags it with the taming diagnostic for `spec`.
SchemeConfig make_scheme_config(const DriftSpec& spec, double h, std::uint64_t n,
                                std::vector<double> x0, HurstParameter hurst,
                                double taming_reference_h = kDefaultTamingReferenceStep);

/// One trajectory of the tamed Euler scheme with its drift component
/// K = X - x0 - B. Arrays are row-major (steps + 1) x dim.
struct SchemeRun {
    SchemeConfig config;
    std::size_t dim = 0;
    std::vector<double> x_values;
    std::vector<double> k_values;
    std::uint64_t seed = 0;
    std::size_t path_n_steps = 0;

    std::size_t steps() const noexcept { return x_values.size() / dim - 1; }
    double time(std::size_t k) const noexcept { return config.h * static_cast<double>(k); }
    std::span<const double> x(std::size_t k) const noexcept { return {x_values.data() + k * dim, dim}; }
    std::span<const double> k(std::size_t k) const noexcept { return {k_values.data() + k * dim, dim}; }
};

/// Coupled mollification level n_h = floor(h^{-1/(1 - gamma + d/p)}).
std::uint64_t coupling_n(double h, const DriftSpec& spec);

/// Tamed Euler scheme on the grid t_k = k h. The drift is frozen on each step,
/// so the time integral over [t_k, t_{k+1}) is exactly h b^n(X_k):
///
///   K_{k+1} = K_k + h b^n(X_k),   X_{k+1} = x0 + K_{k+1} + B_{t_{k+1}}.
///
/// X is assembled from K and B rather than by adding noise increments, so
/// zero drift reproduces x0 + B exactly. The path may be finer than the scheme
/// grid as long as its grid refines it.
SchemeRun run_scheme(const MollifiedDrift& drift, const SchemeConfig& config, const FbmPath& path);

/// The scheme at (h_ref, coupling_n(h_ref)) on a path sampled at resolution h_ref.
SchemeRun run_reference(const DriftSpec& spec, double h_ref, const FbmPath& path,
                        std::vector<double> x0, HurstParameter hurst);

/// max_{s<t} |K_t - K_s| / (t - s)^exponent over the stored grid (Euclidean norm).
double holder_seminorm(const SchemeRun& run, double exponent);

}  // namespace tamed
