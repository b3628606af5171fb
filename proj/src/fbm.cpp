#include "tamed/fbm.hpp"

#include "tamed/error.hpp"
#include "tamed/rng.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <string>

namespace tamed {

namespace {

// The FFTW planner is not thread-safe; execution of an existing plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t n)
        : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (data == nullptr) {
            throw std::bad_alloc();
        }
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    fftw_complex* data;
};

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

}  // namespace

HurstParameter::HurstParameter(double value) : value_(value) {
    if (!(value > 0.0 && value < 1.0)) {
        throw Error(ErrorKind::InvalidArgument,
                    "Hurst parameter must lie in (0,1), got " + std::to_string(value));
    }
}

double fgn_autocovariance(HurstParameter hurst, std::size_t lag) {
    if (lag == 0) {
        return 1.0;
    }
    const double two_h = 2.0 * hurst.value();
    const double k = static_cast<double>(lag);
    return 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) + std::pow(k - 1.0, two_h));
}

double fbm_covariance(HurstParameter hurst, double s, double t) {
    const double two_h = 2.0 * hurst.value();
    return 0.5 * (std::pow(std::abs(s), two_h) + std::pow(std::abs(t), two_h) -
                  std::pow(std::abs(t - s), two_h));
}

struct FbmGenerator::Plan {
    explicit Plan(std::size_t size) : size(size) {
        FftwBuffer scratch(size);
        std::lock_guard lock(planner_mutex());
        handle = fftw_plan_dft_1d(static_cast<int>(size), scratch.data, scratch.data, FFTW_FORWARD,
                                  FFTW_ESTIMATE);
        if (handle == nullptr) {
            throw Error(ErrorKind::InvalidArgument, "FFTW could not plan a transform of size " +
                                                        std::to_string(size));
        }
    }
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(handle);
    }

    void execute(fftw_complex* inplace) const { fftw_execute_dft(handle, inplace, inplace); }

    std::size_t size;
    fftw_plan handle = nullptr;
};

FbmGenerator::FbmGenerator(HurstParameter hurst, std::size_t n_steps, std::size_t dim)
    : hurst_(hurst), n_steps_(n_steps), dim_(dim), padded_(next_power_of_two(n_steps)) {
    if (n_steps == 0) {
        throw Error(ErrorKind::InvalidArgument, "n_steps must be positive");
    }
    if (dim == 0) {
        throw Error(ErrorKind::InvalidArgument, "dim must be positive");
    }

    const std::size_t m = padded_;
    const std::size_t size = 2 * m;
    plan_ = std::make_unique<Plan>(size);

    // First row of the circulant: gamma(0..M), gamma(M-1..1).
    FftwBuffer row(size);
    for (std::size_t k = 0; k <= m; ++k) {
        row.data[k][0] = fgn_autocovariance(hurst, k);
        row.data[k][1] = 0.0;
    }
    for (std::size_t k = 1; k < m; ++k) {
        row.data[m + k][0] = row.data[m - k][0];
        row.data[m + k][1] = 0.0;
    }
    plan_->execute(row.data);

    double max_eig = 0.0;
    double min_eig = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
        max_eig = std::max(max_eig, row.data[k][0]);
        min_eig = std::min(min_eig, row.data[k][0]);
    }
    const double tolerance = 1e-10 * max_eig;
    if (min_eig < -tolerance) {
        throw Error(ErrorKind::NegativeSpectrum,
                    "circulant eigenvalue " + std::to_string(min_eig) + " below -1e-10 * " +
                        std::to_string(max_eig) + " for H=" + std::to_string(hurst.value()) +
                        ", n_steps=" + std::to_string(n_steps));
    }

    amplitude_.resize(size);
    const double inv_size = 1.0 / static_cast<double>(size);
    for (std::size_t k = 0; k < size; ++k) {
        double lambda = row.data[k][0];
        if (lambda < 0.0) {
            lambda = 0.0;
            ++clamped_;
        }
        amplitude_[k] = std::sqrt(lambda * inv_size);
    }
}

FbmGenerator::~FbmGenerator() = default;
FbmGenerator::FbmGenerator(FbmGenerator&&) noexcept = default;
FbmGenerator& FbmGenerator::operator=(FbmGenerator&&) noexcept = default;

FbmPath FbmGenerator::sample(std::uint64_t seed) const {
    FbmPath path;
    path.hurst = hurst_;
    path.n_steps = n_steps_;
    path.dim = dim_;
    path.seed = seed;
    path.values.assign((n_steps_ + 1) * dim_, 0.0);

    const std::size_t size = plan_->size;
    FftwBuffer work(size);
    const double scale = std::pow(1.0 / static_cast<double>(n_steps_), hurst_.value());

    for (std::size_t j = 0; j < dim_; ++j) {
        std::mt19937_64 engine(component_seed(seed, j));
        std::normal_distribution<double> normal;
        for (std::size_t k = 0; k < size; ++k) {
            const double re = normal(engine);
            const double im = normal(engine);
            work.data[k][0] = amplitude_[k] * re;
            work.data[k][1] = amplitude_[k] * im;
        }
        plan_->execute(work.data);

        double running = 0.0;
        for (std::size_t k = 0; k < n_steps_; ++k) {
            running += work.data[k][0];
            path.values[(k + 1) * dim_ + j] = scale * running;
        }
    }
    return path;
}

FbmPath sample_fbm(HurstParameter hurst, std::size_t n_steps, std::size_t dim, std::uint64_t seed) {
    return FbmGenerator(hurst, n_steps, dim).sample(seed);
}

FbmPath subsample(const FbmPath& path, std::size_t factor) {
    if (factor == 0 || path.n_steps % factor != 0) {
        throw Error(ErrorKind::NonDividingFactor, "factor " + std::to_string(factor) +
                                                      " does not divide n_steps " +
                                                      std::to_string(path.n_steps));
    }
    FbmPath coarse;
    coarse.hurst = path.hurst;
    coarse.horizon = path.horizon;
    coarse.n_steps = path.n_steps / factor;
    coarse.dim = path.dim;
    coarse.seed = path.seed;
    coarse.values.resize((coarse.n_steps + 1) * path.dim);
    for (std::size_t k = 0; k <= coarse.n_steps; ++k) {
        const auto src = path.row(k * factor);
        std::copy(src.begin(), src.end(), coarse.values.begin() + static_cast<std::ptrdiff_t>(k * path.dim));
    }
    return coarse;
}

bool CovarianceCheck::within(double sigmas) const noexcept {
    return std::abs(empirical - theoretical) <= sigmas * std_error;
}

std::vector<CovarianceCheck> covariance_self_test(HurstParameter hurst, std::size_t n_steps,
                                                  std::size_t n_paths,
                                                  std::span<const std::pair<double, double>> pairs,
                                                  std::uint64_t seed) {
    if (n_paths < 2) {
        throw Error(ErrorKind::InvalidArgument, "covariance_self_test needs at least 2 paths");
    }
    struct Probe {
        std::size_t ks, kt;
        double sum = 0.0, sum_sq = 0.0;
    };
    std::vector<Probe> probes;
    probes.reserve(pairs.size());
    for (const auto& [s, t] : pairs) {
        if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0) {
            throw Error(ErrorKind::InvalidArgument, "covariance pair outside [0,1]");
        }
        const auto n = static_cast<double>(n_steps);
        probes.push_back({static_cast<std::size_t>(std::lround(s * n)),
                          static_cast<std::size_t>(std::lround(t * n))});
    }

    const FbmGenerator generator(hurst, n_steps, 1);
    for (std::size_t i = 0; i < n_paths; ++i) {
        const FbmPath path = generator.sample(stream_seed(seed, 0, i));
        for (auto& probe : probes) {
            const double product = path.values[probe.ks] * path.values[probe.kt];
            probe.sum += product;
            probe.sum_sq += product * product;
        }
    }

    std::vector<CovarianceCheck> out;
    out.reserve(probes.size());
    const auto n = static_cast<double>(n_paths);
    for (const auto& probe : probes) {
        CovarianceCheck check;
        check.s = static_cast<double>(probe.ks) / static_cast<double>(n_steps);
        check.t = static_cast<double>(probe.kt) / static_cast<double>(n_steps);
        check.empirical = probe.sum / n;
        check.theoretical = fbm_covariance(hurst, check.s, check.t);
        const double variance = std::max(0.0, (probe.sum_sq - n * check.empirical * check.empirical) / (n - 1.0));
        check.std_error = std::sqrt(variance / n);
        out.push_back(check);
    }
    return out;
}

}  // namespace tamed
