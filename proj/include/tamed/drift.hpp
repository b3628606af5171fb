#pragma once

#include "tamed/fbm.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tamed {

/// Besov metadata (gamma, p, d) of a drift. Only gamma - d/p enters the theory.
struct BesovMeta {
    double gamma = 0.0;
    double p = std::numeric_limits<double>::infinity();
    std::size_t dim = 1;

    /// gamma - d/p, with d/inf = 0.
    double effective_regularity() const noexcept;
};

using VectorField = std::function<void(std::span<const double>, std::span<double>)>;

/// alpha * delta_0 with alpha in R^d.
struct DiracDrift {
    std::vector<double> weight;
};

/// 1_{x > 0} on the real line.
struct HalfLineIndicator {};

/// Vector-valued 1_D with D = {x1 >= 0, x2 >= 0}, identical entries per component.
struct QuadrantIndicator {};

/// kappa(x) |x|^{-alpha} on the real line, kappa a smooth cutoff (see bump_cutoff).
struct PowerSingularityDrift {
    double alpha = 0.5;
};

/// A smooth globally Lipschitz drift given as a callable.
///
/// `affine` marks fields of the form x -> A x + c; Gaussian smoothing leaves
/// those unchanged, so their mollification is the field itself.
struct SmoothDrift {
    VectorField field;
    double lipschitz = 0.0;
    double sup_bound = std::numeric_limits<double>::infinity();
    bool affine = false;
    std::string label = "smooth";
};

using DriftKind =
    std::variant<DiracDrift, HalfLineIndicator, QuadrantIndicator, PowerSingularityDrift, SmoothDrift>;

class DriftSpec {
public:
    static DriftSpec dirac(std::vector<double> weight);
    static DriftSpec indicator_half_line();
    static DriftSpec indicator_quadrant();
    static DriftSpec power_singularity(double alpha);
    static DriftSpec smooth(std::size_t dim, SmoothDrift drift);
    /// b(x) = -theta x in one dimension (fractional Ornstein-Uhlenbeck drift).
    static DriftSpec linear(double theta);
    /// b(x) = c in every component.
    static DriftSpec constant(std::size_t dim, double c);

    const DriftKind& kind() const noexcept { return kind_; }
    const BesovMeta& besov() const noexcept { return besov_; }
    std::size_t dim() const noexcept { return besov_.dim; }
    /// Short identifier used in file names and summaries, e.g. "dirac".
    const std::string& label() const noexcept { return label_; }

    /// Pointwise value of the unmollified drift where it is a function
    /// (indicators, power singularity away from 0, smooth). Throws for Dirac.
    void evaluate_raw(std::span<const double> x, std::span<double> out) const;

private:
    DriftSpec(DriftKind kind, BesovMeta besov, std::string label);

    DriftKind kind_;
    BesovMeta besov_;
    std::string label_;
};

/// Smooth cutoff equal to 1 on [-1/2, 1/2] and supported in [-1, 1],
/// built from the exp(-1/t) profile.
double bump_cutoff(double x) noexcept;

/// The Gaussian mollification b^n = G_{1/n} b (kernel variance 1/n), with
/// cached sup-norm and Lipschitz constant. Immutable and safe to share.
///
/// Norms use the max over components: sup_norm = sup_x max_i |b^n_i(x)| and
/// lip_const = sup_x max_{i,j} |d_j b^n_i(x)|.
class MollifiedDrift {
public:
    MollifiedDrift(DriftSpec spec, std::uint64_t n);

    void eval(std::span<const double> x, std::span<double> out) const;

    const DriftSpec& spec() const noexcept { return spec_; }
    std::uint64_t n() const noexcept { return n_; }
    std::size_t dim() const noexcept { return spec_.dim(); }
    double sup_norm() const noexcept { return sup_norm_; }
    double lip_const() const noexcept { return lip_const_; }
    /// The C^1 norm sup_norm + lip_const.
    double c1_norm() const noexcept { return sup_norm_ + lip_const_; }

    /// Derivative of the one-dimensional power-singularity mollification.
    double power_singularity_derivative(double x) const;

private:
    double power_singularity_value(double x) const;
    void smooth_value(const SmoothDrift& drift, std::span<const double> x, std::span<double> out) const;
    void compute_norms();

    DriftSpec spec_;
    std::uint64_t n_;
    double sqrt_n_;
    double dirac_scale_ = 0.0;  // (n / 2 pi)^{d/2}
    double sup_norm_ = 0.0;
    double lip_const_ = 0.0;
};

MollifiedDrift mollify(const DriftSpec& spec, std::uint64_t n);
double sup_norm(const MollifiedDrift& m);
double lip_const(const MollifiedDrift& m);

/// floor(h^{-1/(1 - r)}) for effective regularity r <= 0, guarded against
/// round-off just below an integer.
std::uint64_t coupled_level(double effective_regularity, double h);

enum class HurstRegime { SubCritical, LimitCase, OutOfTheory };

std::string to_string(HurstRegime regime);

struct HurstAdmissibility {
    double h_max = 0.5;
    /// True when H = h_max is an admitted limit case (p < infinity).
    bool limit_case_admitted = false;
};

HurstAdmissibility admissible_hurst(const DriftSpec& spec);
HurstRegime classify_hurst(const DriftSpec& spec, HurstParameter hurst);

/// 1 / (2 (1 - gamma + d/p)) for gamma - d/p < 0, and 1/2 when gamma - d/p = 0.
double theoretical_rate(const DriftSpec& spec);

struct TamingDiagnostic {
    double sup_norm = 0.0;
    double c1_norm = 0.0;
    double eta = 0.0;
    double product_sup = 0.0;  // ||b^n||_inf h^{1/2 - H}
    double product_c1 = 0.0;   // ||b^n||_{C^1} h^{1/2 + H - eta}
    double reference_h = 0.0;
    std::uint64_t reference_n = 0;
    double reference_product_sup = 0.0;
    double reference_product_c1 = 0.0;
    bool flagged = false;
};

/// Default coarsest step against which taming products are compared.
inline constexpr double kDefaultTamingReferenceStep = 1.0 / 64.0;

/// Evaluates both taming products for (h, n) and flags the pair when either
/// exceeds its value at (reference_h, coupled n). eta is fixed to H/2.
TamingDiagnostic check_taming_condition(const DriftSpec& spec, HurstParameter hurst, double h,
                                        std::uint64_t n,
                                        double reference_h = kDefaultTamingReferenceStep);

}  // namespace tamed
