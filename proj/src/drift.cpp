#include "tamed/drift.hpp"

#include "quadrature.hpp"
#include "tamed/error.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace tamed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRegularityTolerance = 1e-12;
constexpr double kInvSqrt2 = 0.70710678118654752440;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Standard normal CDF at sqrt(n) x.
inline double mollified_step(double x, double sqrt_n) {
    return 0.5 * std::erfc(-x * sqrt_n * kInvSqrt2);
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

// Maximise f over [lo, hi] by a uniform scan followed by Brent refinement
// around the best grid point.
template <class F>
double grid_maximum(F&& f, double lo, double hi, double spacing) {
    const auto cells = static_cast<std::size_t>(std::ceil((hi - lo) / spacing));
    const double dx = (hi - lo) / static_cast<double>(cells);
    double best_x = lo;
    double best = f(lo);
    for (std::size_t k = 1; k <= cells; ++k) {
        const double x = lo + dx * static_cast<double>(k);
        const double v = f(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    const auto [arg, neg] = boost::math::tools::brent_find_minima(
        [&](double x) { return -f(x); }, std::max(lo, best_x - dx), std::min(hi, best_x + dx), 40);
    (void)arg;
    return std::max(best, -neg);
}

}  // namespace

double BesovMeta::effective_regularity() const noexcept {
    if (std::isinf(p)) {
        return gamma;
    }
    return gamma - static_cast<double>(dim) / p;
}

DriftSpec::DriftSpec(DriftKind kind, BesovMeta besov, std::string label)
    : kind_(std::move(kind)), besov_(besov), label_(std::move(label)) {}

DriftSpec DriftSpec::dirac(std::vector<double> weight) {
    if (weight.empty()) {
        throw Error(ErrorKind::InvalidArgument, "Dirac drift needs a non-empty weight vector");
    }
    const std::size_t d = weight.size();
    return DriftSpec(DiracDrift{std::move(weight)}, BesovMeta{0.0, 1.0, d}, "dirac");
}

DriftSpec DriftSpec::indicator_half_line() {
    return DriftSpec(HalfLineIndicator{}, BesovMeta{0.0, kInf, 1}, "indicator_half_line");
}

DriftSpec DriftSpec::indicator_quadrant() {
    return DriftSpec(QuadrantIndicator{}, BesovMeta{0.0, kInf, 2}, "indicator_quadrant");
}

DriftSpec DriftSpec::power_singularity(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error(ErrorKind::InvalidArgument,
                    "power singularity exponent must lie in (0,1), got " + std::to_string(alpha));
    }
    return DriftSpec(PowerSingularityDrift{alpha}, BesovMeta{-alpha, kInf, 1}, "power_singularity");
}

DriftSpec DriftSpec::smooth(std::size_t dim, SmoothDrift drift) {
    if (dim == 0 || !drift.field) {
        throw Error(ErrorKind::InvalidArgument, "smooth drift needs a callable and dim >= 1");
    }
    // Bounded measurable regime: smooth fields are tagged with gamma - d/p = 0.
    std::string label = drift.label;
    return DriftSpec(std::move(drift), BesovMeta{0.0, kInf, dim}, std::move(label));
}

DriftSpec DriftSpec::linear(double theta) {
    SmoothDrift drift;
    drift.field = [theta](std::span<const double> x, std::span<double> out) { out[0] = -theta * x[0]; };
    drift.lipschitz = std::abs(theta);
    drift.sup_bound = theta == 0.0 ? 0.0 : kInf;
    drift.affine = true;
    drift.label = "linear";
    return smooth(1, std::move(drift));
}

DriftSpec DriftSpec::constant(std::size_t dim, double c) {
    SmoothDrift drift;
    drift.field = [c](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), c); };
    drift.lipschitz = 0.0;
    drift.sup_bound = std::abs(c);
    drift.affine = true;
    drift.label = "constant";
    return smooth(dim, std::move(drift));
}

void DriftSpec::evaluate_raw(std::span<const double> x, std::span<double> out) const {
    std::visit(Overloaded{
                   [&](const DiracDrift&) {
                       throw Error(ErrorKind::InvalidArgument, "a Dirac mass has no pointwise values");
                   },
                   [&](const HalfLineIndicator&) { out[0] = x[0] > 0.0 ? 1.0 : 0.0; },
                   [&](const QuadrantIndicator&) {
                       const double v = (x[0] >= 0.0 && x[1] >= 0.0) ? 1.0 : 0.0;
                       out[0] = v;
                       out[1] = v;
                   },
                   [&](const PowerSingularityDrift& p) {
                       out[0] = x[0] == 0.0 ? kInf : bump_cutoff(x[0]) * std::pow(std::abs(x[0]), -p.alpha);
                   },
                   [&](const SmoothDrift& s) { s.field(x, out); },
               },
               kind_);
}

double bump_cutoff(double x) noexcept {
    const double r = std::abs(x);
    if (r <= 0.5) {
        return 1.0;
    }
    if (r >= 1.0) {
        return 0.0;
    }
    const double inner = std::exp(-1.0 / (1.0 - r));
    const double outer = std::exp(-1.0 / (r - 0.5));
    return inner / (inner + outer);
}

MollifiedDrift::MollifiedDrift(DriftSpec spec, std::uint64_t n)
    : spec_(std::move(spec)), n_(n), sqrt_n_(std::sqrt(static_cast<double>(n))) {
    if (n == 0) {
        throw Error(ErrorKind::InvalidArgument, "mollification level n must be >= 1");
    }
    dirac_scale_ = std::pow(static_cast<double>(n) / (2.0 * std::numbers::pi),
                            0.5 * static_cast<double>(spec_.dim()));
    compute_norms();
}

void MollifiedDrift::eval(std::span<const double> x, std::span<double> out) const {
    std::visit(Overloaded{
                   [&](const DiracDrift& d) {
                       double r2 = 0.0;
                       for (double xi : x) {
                           r2 += xi * xi;
                       }
                       const double g = dirac_scale_ * std::exp(-0.5 * static_cast<double>(n_) * r2);
                       for (std::size_t i = 0; i < d.weight.size(); ++i) {
                           out[i] = d.weight[i] * g;
                       }
                   },
                   [&](const HalfLineIndicator&) { out[0] = mollified_step(x[0], sqrt_n_); },
                   [&](const QuadrantIndicator&) {
                       const double v = mollified_step(x[0], sqrt_n_) * mollified_step(x[1], sqrt_n_);
                       out[0] = v;
                       out[1] = v;
                   },
                   [&](const PowerSingularityDrift&) { out[0] = power_singularity_value(x[0]); },
                   [&](const SmoothDrift& s) {
                       if (s.affine) {
                           s.field(x, out);
                       } else {
                           smooth_value(s, x, out);
                       }
                   },
               },
               spec_.kind());
}

// Convolution of `kernel` with kappa(y)|y|^{-alpha}. Each half-line is mapped by
// y = +-u^q, q = 1/(1-alpha), which cancels the singularity exactly:
// dy |y|^{-alpha} = q du. Breakpoints at x and x +- {3, 8} sigma keep every
// piece free of the kernel's sharp features; the error target applies to the sum.
template <class Kernel>
static double power_convolution(double x, double alpha, double sigma, Kernel&& kernel, const char* what) {
    const double q = 1.0 / (1.0 - alpha);
    std::vector<double> cuts = {-1.0, 0.0, 1.0};
    for (double k : {-8.0, -3.0, 0.0, 3.0, 8.0}) {
        const double y = x + k * sigma;
        // Slivers left by rounding (x - 8 sigma == 1e-16) stall the adaptive split.
        if (std::abs(y) > 1e-12 && std::abs(y) < 1.0 - 1e-12) {
            cuts.push_back(y);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    detail::QuadratureResult total;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        const double sign = hi <= 0.0 ? -1.0 : 1.0;
        auto integrand = [&](double u) {
            const double y = sign * std::pow(u, q);
            return q * kernel(x - y) * bump_cutoff(y);
        };
        const double ua = std::pow(std::min(std::abs(lo), std::abs(hi)), 1.0 - alpha);
        const double ub = std::pow(std::max(std::abs(lo), std::abs(hi)), 1.0 - alpha);
        // Pieces far out in a Gaussian or cutoff tail can chase a relative target
        // on a negligible mass; the depth cap bounds them and the summed check decides.
        const auto piece = detail::integrate_piece(integrand, ua, ub, detail::kQuadratureRelTol, 12);
        total.value += piece.value;
        total.error += piece.error;
        total.l1 += piece.l1;
    }
    detail::check_convergence(total, what);
    return total.value;
}

double MollifiedDrift::power_singularity_value(double x) const {
    const double alpha = std::get<PowerSingularityDrift>(spec_.kind()).alpha;
    const double n = static_cast<double>(n_);
    const double norm = sqrt_n_ / std::sqrt(2.0 * std::numbers::pi);
    return power_convolution(
        x, alpha, 1.0 / sqrt_n_, [&](double z) { return norm * std::exp(-0.5 * n * z * z); }, "power singularity mollification");
}

double MollifiedDrift::power_singularity_derivative(double x) const {
    const double alpha = std::get<PowerSingularityDrift>(spec_.kind()).alpha;
    const double n = static_cast<double>(n_);
    const double norm = sqrt_n_ / std::sqrt(2.0 * std::numbers::pi);
    return power_convolution(
        x, alpha, 1.0 / sqrt_n_, [&](double z) { return -n * z * norm * std::exp(-0.5 * n * z * z); },
        "power singularity derivative");
}

// E[f(x - Z / sqrt(n))], Z standard normal in R^d, by nested adaptive quadrature
// over [-10, 10]^d (the Gaussian tail beyond 10 is below 1e-22).
void MollifiedDrift::smooth_value(const SmoothDrift& drift, std::span<const double> x,
                                  std::span<double> out) const {
    const std::size_t d = spec_.dim();
    std::vector<double> shifted(d);
    std::vector<double> values(d);
    const double inv_sqrt_n = 1.0 / sqrt_n_;
    constexpr double kLimit = 10.0;

    for (std::size_t component = 0; component < d; ++component) {
        std::function<double(std::size_t)> nested = [&](std::size_t axis) -> double {
            return detail::integrate(
                [&](double u) {
                    shifted[axis] = x[axis] - u * inv_sqrt_n;
                    const double weight = std::exp(-0.5 * u * u) * std::numbers::inv_sqrtpi * kInvSqrt2;
                    if (axis + 1 == d) {
                        drift.field(shifted, values);
                        return weight * values[component];
                    }
                    return weight * nested(axis + 1);
                },
                -kLimit, kLimit, "smooth drift mollification");
        };
        out[component] = nested(0);
    }
}

void MollifiedDrift::compute_norms() {
    std::visit(Overloaded{
                   [&](const DiracDrift& d) {
                       const double weight = max_abs(d.weight);
                       sup_norm_ = weight * dirac_scale_;
                       lip_const_ = weight * dirac_scale_ * sqrt_n_ * std::exp(-0.5);
                   },
                   [&](const HalfLineIndicator&) {
                       sup_norm_ = 1.0;
                       lip_const_ = sqrt_n_ / std::sqrt(2.0 * std::numbers::pi);
                   },
                   [&](const QuadrantIndicator&) {
                       sup_norm_ = 1.0;
                       lip_const_ = sqrt_n_ / std::sqrt(2.0 * std::numbers::pi);
                   },
                   [&](const PowerSingularityDrift&) {
                       const double sigma = 1.0 / sqrt_n_;
                       const double reach = 1.0 + 8.0 * sigma;
                       const double spacing = std::min(sigma / 4.0, 1.0 / 64.0);
                       sup_norm_ = grid_maximum([&](double x) { return std::abs(power_singularity_value(x)); },
                                                -reach, reach, spacing);
                       lip_const_ = grid_maximum(
                           [&](double x) { return std::abs(power_singularity_derivative(x)); }, -reach, reach,
                           spacing);
                   },
                   [&](const SmoothDrift& s) {
                       sup_norm_ = s.sup_bound;
                       lip_const_ = s.lipschitz;
                   },
               },
               spec_.kind());
}

MollifiedDrift mollify(const DriftSpec& spec, std::uint64_t n) { return MollifiedDrift(spec, n); }

double sup_norm(const MollifiedDrift& m) { return m.sup_norm(); }

double lip_const(const MollifiedDrift& m) { return m.lip_const(); }

std::uint64_t coupled_level(double effective_regularity, double h) {
    const double exponent = -1.0 / (1.0 - effective_regularity);
    const double raw = std::pow(h, exponent);
    // pow(1e-4, -0.5) may land a few ulps below 100.
    return static_cast<std::uint64_t>(std::floor(raw * (1.0 + 1e-12)));
}

std::string to_string(HurstRegime regime) {
    switch (regime) {
        case HurstRegime::SubCritical: return "sub-critical";
        case HurstRegime::LimitCase: return "limit case";
        case HurstRegime::OutOfTheory: return "out-of-theory";
    }
    return "unknown";
}

HurstAdmissibility admissible_hurst(const DriftSpec& spec) {
    const BesovMeta& b = spec.besov();
    const double r = b.effective_regularity();
    if (r > kRegularityTolerance) {
        throw Error(ErrorKind::PositiveRegularity,
                    "gamma - d/p = " + std::to_string(r) + " > 0 is outside the distributional regime");
    }
    if (r >= -kRegularityTolerance) {
        return {0.5, false};
    }
    // The limit case also needs gamma > 1 - 1/(2H) = r, i.e. d/p > 0.
    return {1.0 / (2.0 * (1.0 - r)), !std::isinf(b.p)};
}

HurstRegime classify_hurst(const DriftSpec& spec, HurstParameter hurst) {
    const HurstAdmissibility adm = admissible_hurst(spec);
    const double h = hurst.value();
    if (h < adm.h_max - kRegularityTolerance) {
        return HurstRegime::SubCritical;
    }
    if (std::abs(h - adm.h_max) <= kRegularityTolerance && adm.limit_case_admitted) {
        return HurstRegime::LimitCase;
    }
    return HurstRegime::OutOfTheory;
}

double theoretical_rate(const DriftSpec& spec) {
    const double r = spec.besov().effective_regularity();
    if (r > kRegularityTolerance) {
        throw Error(ErrorKind::PositiveRegularity,
                    "gamma - d/p = " + std::to_string(r) + " > 0 is outside the distributional regime");
    }
    if (r >= -kRegularityTolerance) {
        return 0.5;
    }
    return 1.0 / (2.0 * (1.0 - r));
}

TamingDiagnostic check_taming_condition(const DriftSpec& spec, HurstParameter hurst, double h,
                                        std::uint64_t n, double reference_h) {
    if (!(h > 0.0 && h < 1.0) || !(reference_h > 0.0 && reference_h < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "taming check needs steps in (0,1)");
    }
    const double r = spec.besov().effective_regularity();
    if (r > kRegularityTolerance) {
        throw Error(ErrorKind::PositiveRegularity, "taming check requires gamma - d/p <= 0");
    }
    const double H = hurst.value();

    TamingDiagnostic diag;
    diag.eta = 0.5 * H;
    diag.reference_h = reference_h;
    diag.reference_n = std::max<std::uint64_t>(1, coupled_level(std::min(r, 0.0), reference_h));

    const MollifiedDrift at_step(spec, n);
    diag.sup_norm = at_step.sup_norm();
    diag.c1_norm = at_step.c1_norm();
    diag.product_sup = diag.sup_norm * std::pow(h, 0.5 - H);
    diag.product_c1 = diag.c1_norm * std::pow(h, 0.5 + H - diag.eta);

    const MollifiedDrift at_reference(spec, diag.reference_n);
    diag.reference_product_sup = at_reference.sup_norm() * std::pow(reference_h, 0.5 - H);
    diag.reference_product_c1 = at_reference.c1_norm() * std::pow(reference_h, 0.5 + H - diag.eta);

    constexpr double kSlack = 1.0 + 1e-12;
    diag.flagged = diag.product_sup > diag.reference_product_sup * kSlack ||
                   diag.product_c1 > diag.reference_product_c1 * kSlack;
    return diag;
}

}  // namespace tamed
