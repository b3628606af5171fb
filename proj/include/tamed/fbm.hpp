#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace tamed {

/// Hurst index of the driving noise, strictly inside (0, 1).
class HurstParameter {
public:
    explicit HurstParameter(double value);

    double value() const noexcept { return value_; }

    friend bool operator==(HurstParameter, HurstParameter) = default;

private:
    double value_;
};

/// A d-dimensional fBm sampled on the uniform grid t_k = k / n_steps of [0, 1].
///
/// Values are stored row-major: `values[k * dim + j]` is component j at t_k.
struct FbmPath {
    HurstParameter hurst{0.5};
    double horizon = 1.0;
    std::size_t n_steps = 0;
    std::size_t dim = 0;
    std::vector<double> values;
    std::uint64_t seed = 0;

    double time(std::size_t k) const noexcept {
        return horizon * static_cast<double>(k) / static_cast<double>(n_steps);
    }
    double at(std::size_t k, std::size_t j) const noexcept { return values[k * dim + j]; }
    std::span<const double> row(std::size_t k) const noexcept {
        return {values.data() + k * dim, dim};
    }
};

/// Unit-step fractional Gaussian noise autocovariance
/// 0.5 (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}).
double fgn_autocovariance(HurstParameter hurst, std::size_t lag);

/// Closed-form fBm covariance 0.5 (s^{2H} + t^{2H} - |t-s|^{2H}).
double fbm_covariance(HurstParameter hurst, double s, double t);

/// Exact fBm sampler by circulant embedding of the fGn covariance.
///
/// The spectrum of the embedding is computed once at construction; sample()
/// is const and reentrant, so one generator can serve any number of threads.
/// Non power-of-two grids are padded up to the next power of two and truncated.
class FbmGenerator {
public:
    FbmGenerator(HurstParameter hurst, std::size_t n_steps, std::size_t dim = 1);
    ~FbmGenerator();
    FbmGenerator(const FbmGenerator&) = delete;
    FbmGenerator& operator=(const FbmGenerator&) = delete;
    FbmGenerator(FbmGenerator&&) noexcept;
    FbmGenerator& operator=(FbmGenerator&&) noexcept;

    FbmPath sample(std::uint64_t seed) const;

    HurstParameter hurst() const noexcept { return hurst_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t dim() const noexcept { return dim_; }
    /// Size of the padded fGn sequence (a power of two, >= n_steps).
    std::size_t embedding_size() const noexcept { return padded_; }
    /// Number of eigenvalues in [-1e-10 max, 0) that were clamped to zero.
    std::size_t clamped_eigenvalues() const noexcept { return clamped_; }

private:
    struct Plan;

    HurstParameter hurst_;
    std::size_t n_steps_;
    std::size_t dim_;
    std::size_t padded_;
    std::size_t clamped_ = 0;
    std::vector<double> amplitude_;  // sqrt(lambda_j / (2M))
    std::unique_ptr<Plan> plan_;
};

FbmPath sample_fbm(HurstParameter hurst, std::size_t n_steps, std::size_t dim, std::uint64_t seed);

/// Restriction to every `factor`-th grid point; values are copied, not resimulated.
FbmPath subsample(const FbmPath& path, std::size_t factor);

struct CovarianceCheck {
    double s = 0.0;
    double t = 0.0;
    double empirical = 0.0;
    double theoretical = 0.0;
    double std_error = 0.0;

    bool within(double sigmas) const noexcept;
};

/// Empirical E[B_s B_t] (first component) over n_paths paths versus the closed form.
/// Times are snapped to the nearest grid point of the n_steps grid.
std::vector<CovarianceCheck> covariance_self_test(HurstParameter hurst, std::size_t n_steps,
                                                  std::size_t n_paths,
                                                  std::span<const std::pair<double, double>> pairs,
                                                  std::uint64_t seed);

}  // namespace tamed
