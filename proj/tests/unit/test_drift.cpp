#include "catch_amalgamated.hpp"

#include "tamed/drift.hpp"
#include "tamed/error.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace tamed;
using Catch::Approx;

namespace {

double eval1(const MollifiedDrift& m, double x) {
    double in[1] = {x};
    double out[1] = {0.0};
    m.eval(in, out);
    return out[0];
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    }
    return sxy / sxx;
}

// Independent cutoff: 1 on [-1/2,1/2], 0 outside [-1,1], exp(-1/t) smooth step between.
double kappa(double y) {
    const double r = std::abs(y);
    if (r <= 0.5) return 1.0;
    if (r >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - r));
    const double b = std::exp(-1.0 / (r - 0.5));
    return a / (a + b);
}

// int g_{1/n}(-y) |y|^{-1/2} kappa(y) dy by the trapezoid rule after y = +-u^2.
double dense_trapezoid_at_origin(double n, std::size_t cells) {
    const double norm = std::sqrt(n / (2.0 * std::numbers::pi));
    auto f = [&](double u) {
        const double y = u * u;
        return 2.0 * norm * std::exp(-0.5 * n * y * y) * kappa(y);
    };
    const double du = 1.0 / static_cast<double>(cells);
    double sum = 0.5 * (f(0.0) + f(1.0));
    for (std::size_t k = 1; k < cells; ++k) {
        sum += f(du * static_cast<double>(k));
    }
    return 2.0 * sum * du;  // both half-lines
}

}  // namespace

TEST_CASE("Besov metadata of the catalogue", "[drift]") {
    CHECK(DriftSpec::dirac({1.0}).besov().effective_regularity() == -1.0);
    CHECK(DriftSpec::dirac({1.0, 0.5}).besov().effective_regularity() == -2.0);
    CHECK(DriftSpec::indicator_half_line().besov().effective_regularity() == 0.0);
    CHECK(DriftSpec::indicator_quadrant().besov().effective_regularity() == 0.0);
    CHECK(DriftSpec::indicator_quadrant().dim() == 2);
    const auto power = DriftSpec::power_singularity(0.5);
    CHECK(power.besov().gamma == -0.5);
    CHECK(std::isinf(power.besov().p));
    REQUIRE_THROWS_AS(DriftSpec::power_singularity(1.0), Error);
}

TEST_CASE("Dirac mollification at the origin", "[drift]") {
    const MollifiedDrift m(DriftSpec::dirac({1.0}), 100);
    CHECK(eval1(m, 0.0) == Approx(3.989422804014327).epsilon(1e-14));
    CHECK(sup_norm(m) == Approx(3.989422804014327).epsilon(1e-14));
    CHECK(lip_const(m) == Approx(24.197072451914337).epsilon(1e-12));
    // away from the origin: Gaussian density
    CHECK(eval1(m, 0.1) == Approx(3.989422804014327 * std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("weighted Dirac in two dimensions", "[drift]") {
    const MollifiedDrift m(DriftSpec::dirac({2.0, -1.0}), 50);
    double x[2] = {0.0, 0.0};
    double out[2];
    m.eval(x, out);
    const double scale = 50.0 / (2.0 * std::numbers::pi);
    CHECK(out[0] == Approx(2.0 * scale).epsilon(1e-14));
    CHECK(out[1] == Approx(-scale).epsilon(1e-14));
    CHECK(m.sup_norm() == Approx(2.0 * scale).epsilon(1e-14));
}

TEST_CASE("half-line indicator limits and symmetry", "[drift]") {
    for (std::uint64_t n : {1u, 100u, 10000u}) {
        const MollifiedDrift m(DriftSpec::indicator_half_line(), n);
        CHECK(eval1(m, 0.0) == 0.5);
        CHECK(eval1(m, 50.0) == 1.0);
        CHECK(eval1(m, -50.0) == 0.0);
        CHECK(eval1(m, 0.3) + eval1(m, -0.3) == Approx(1.0).epsilon(1e-15));
        CHECK(sup_norm(m) == 1.0);
    }
    const MollifiedDrift m(DriftSpec::indicator_half_line(), 100);
    CHECK(lip_const(m) == Approx(3.989422804014327).epsilon(1e-14));
}

TEST_CASE("quadrant indicator factorises over coordinates", "[drift]") {
    const std::uint64_t n = 64;
    const MollifiedDrift quad(DriftSpec::indicator_quadrant(), n);
    const MollifiedDrift line(DriftSpec::indicator_half_line(), n);
    for (double a : {-0.7, -0.1, 0.0, 0.05, 0.4, 2.0}) {
        for (double b : {-0.3, 0.0, 0.2, 1.1}) {
            double x[2] = {a, b};
            double out[2];
            quad.eval(x, out);
            const double expected = eval1(line, a) * eval1(line, b);
            CHECK(std::abs(out[0] - expected) <= 1e-12);
            CHECK(out[0] == out[1]);
        }
    }
}

TEST_CASE("power singularity matches a dense trapezoid convolution", "[drift][quadrature]") {
    const MollifiedDrift m(DriftSpec::power_singularity(0.5), 400);
    const double oracle = dense_trapezoid_at_origin(400.0, 4000000);
    CHECK(eval1(m, 0.0) == Approx(oracle).epsilon(1e-6));
    // symmetric drift
    CHECK(eval1(m, 0.2) == Approx(eval1(m, -0.2)).epsilon(1e-10));
    // far away from the support the drift vanishes
    CHECK(std::abs(eval1(m, 3.0)) < 1e-20);
    CHECK(m.sup_norm() >= eval1(m, 0.0));
}

TEST_CASE("power singularity norms follow n^{alpha/2} and n^{(1+alpha)/2}", "[drift][quadrature]") {
    std::vector<double> ns, sups, lips;
    for (double n : {400.0, 1600.0, 6400.0}) {
        const MollifiedDrift m(DriftSpec::power_singularity(0.5), static_cast<std::uint64_t>(n));
        ns.push_back(n);
        sups.push_back(m.sup_norm());
        lips.push_back(m.lip_const());
    }
    CHECK(loglog_slope(ns, sups) == Approx(0.25).margin(0.02));
    CHECK(loglog_slope(ns, lips) == Approx(0.75).margin(0.02));
}

TEST_CASE("Dirac norm scaling exponents", "[drift]") {
    std::vector<double> ns = {1e2, 1e3, 1e4, 1e5};
    std::vector<double> sups, lips, c1;
    for (double n : ns) {
        const MollifiedDrift m(DriftSpec::dirac({1.0}), static_cast<std::uint64_t>(n));
        sups.push_back(m.sup_norm());
        lips.push_back(m.lip_const());
        c1.push_back(m.sup_norm() + m.lip_const());
        // sup_norm * n^{(gamma - d/p)/2} is exactly (2 pi)^{-1/2}
        CHECK(m.sup_norm() * std::pow(n, -0.5) == Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
    }
    CHECK(loglog_slope(ns, sups) == Approx(0.5).margin(1e-12));
    CHECK(loglog_slope(ns, lips) == Approx(1.0).margin(1e-12));
    // OLS slope of log(sqrt(n/2pi) + n e^{-1/2}/sqrt(2pi)) over these four n (numpy polyfit)
    CHECK(loglog_slope(ns, c1) == Approx(0.9792970021128062).margin(1e-9));
}

TEST_CASE("smooth drift mollification converges to the field", "[drift][quadrature]") {
    SmoothDrift sine;
    sine.field = [](std::span<const double> x, std::span<double> out) { out[0] = std::sin(3.0 * x[0]); };
    sine.lipschitz = 3.0;
    sine.sup_bound = 1.0;
    const DriftSpec spec = DriftSpec::smooth(1, sine);

    double previous = INFINITY;
    for (std::uint64_t n : {100u, 10000u}) {
        const MollifiedDrift m(spec, n);
        double worst = 0.0;
        for (double x = -2.0; x <= 2.0; x += 0.125) {
            worst = std::max(worst, std::abs(eval1(m, x) - std::sin(3.0 * x)));
        }
        // |E f(x - Z/sqrt(n)) - f(x)| <= L E|Z| / sqrt(n)
        const double modulus = 3.0 * std::sqrt(2.0 / std::numbers::pi) / std::sqrt(static_cast<double>(n));
        CHECK(worst < modulus);
        CHECK(worst < previous);
        previous = worst;
    }
    // closed form for sin: E sin(3(x - Z/sqrt(n))) = e^{-9/(2n)} sin(3x)
    const MollifiedDrift m(spec, 100);
    CHECK(eval1(m, 0.4) == Approx(std::exp(-4.5 / 100.0) * std::sin(1.2)).epsilon(1e-8));
}

TEST_CASE("affine drifts are left unchanged by mollification", "[drift]") {
    const MollifiedDrift m(DriftSpec::linear(2.0), 10);
    CHECK(eval1(m, 0.75) == -1.5);
    CHECK(m.lip_const() == 2.0);
}

TEST_CASE("bump cutoff shape", "[drift]") {
    CHECK(bump_cutoff(0.0) == 1.0);
    CHECK(bump_cutoff(0.5) == 1.0);
    CHECK(bump_cutoff(-0.5) == 1.0);
    CHECK(bump_cutoff(1.0) == 0.0);
    CHECK(bump_cutoff(-1.3) == 0.0);
    CHECK(bump_cutoff(0.75) == Approx(0.5).epsilon(1e-15));
    double last = 1.0;
    for (double x = 0.5; x <= 1.0; x += 1.0 / 256) {
        CHECK(bump_cutoff(x) <= last);
        last = bump_cutoff(x);
    }
}

TEST_CASE("admissible Hurst range", "[drift]") {
    CHECK(admissible_hurst(DriftSpec::dirac({1.0})).h_max == 0.25);
    CHECK(admissible_hurst(DriftSpec::dirac({1.0})).limit_case_admitted);
    CHECK(admissible_hurst(DriftSpec::indicator_half_line()).h_max == 0.5);
    CHECK_FALSE(admissible_hurst(DriftSpec::indicator_half_line()).limit_case_admitted);
    CHECK(admissible_hurst(DriftSpec::power_singularity(0.5)).h_max == Approx(1.0 / 3.0).epsilon(1e-15));

    CHECK(classify_hurst(DriftSpec::dirac({1.0}), HurstParameter(0.2)) == HurstRegime::SubCritical);
    CHECK(classify_hurst(DriftSpec::dirac({1.0}), HurstParameter(0.25)) == HurstRegime::LimitCase);
    CHECK(classify_hurst(DriftSpec::dirac({1.0}), HurstParameter(0.3)) == HurstRegime::OutOfTheory);
    CHECK(classify_hurst(DriftSpec::indicator_half_line(), HurstParameter(0.45)) == HurstRegime::SubCritical);
    CHECK(classify_hurst(DriftSpec::indicator_half_line(), HurstParameter(0.5)) == HurstRegime::OutOfTheory);
    CHECK(classify_hurst(DriftSpec::power_singularity(0.5), HurstParameter(0.3)) == HurstRegime::SubCritical);
}

TEST_CASE("theoretical rate", "[drift]") {
    CHECK(theoretical_rate(DriftSpec::dirac({1.0})) == 0.25);
    CHECK(theoretical_rate(DriftSpec::dirac({1.0, 1.0})) == Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(theoretical_rate(DriftSpec::indicator_quadrant()) == 0.5);
    CHECK(theoretical_rate(DriftSpec::power_singularity(0.5)) == Approx(1.0 / 3.0).epsilon(1e-15));
    for (const auto& spec : {DriftSpec::dirac({1.0}), DriftSpec::dirac({1.0, 1.0}), DriftSpec::power_singularity(0.3),
                             DriftSpec::power_singularity(0.8)}) {
        CHECK(theoretical_rate(spec) == Approx(admissible_hurst(spec).h_max).epsilon(1e-15));
    }
}

TEST_CASE("coupled level", "[drift]") {
    CHECK(coupled_level(-1.0, 1e-4) == 100);
    CHECK(coupled_level(0.0, 1e-3) == 1000);
    CHECK(coupled_level(-2.0, 1e-4) == 21);
    CHECK(coupled_level(-1.0, 1.0 / 1024) == 32);
}

TEST_CASE("taming diagnostic", "[drift]") {
    const auto dirac = DriftSpec::dirac({1.0});
    const auto coupled = check_taming_condition(dirac, HurstParameter(0.2), 1e-4, 100);
    CHECK(coupled.product_sup == Approx(0.2517155618429606).epsilon(1e-12));
    CHECK(coupled.eta == 0.1);
    CHECK_FALSE(coupled.flagged);

    const auto decoupled = check_taming_condition(dirac, HurstParameter(0.2), 1e-4, 100000000);
    CHECK(decoupled.product_sup == Approx(251.71556184296062).epsilon(1e-12));
    CHECK(decoupled.flagged);

    SmoothDrift bounded;
    bounded.field = [](std::span<const double> x, std::span<double> out) { out[0] = std::tanh(x[0]); };
    bounded.lipschitz = 1.0;
    bounded.sup_bound = 1.0;
    const auto smooth = check_taming_condition(DriftSpec::smooth(1, bounded), HurstParameter(0.3), 1e-3, 1000);
    CHECK(smooth.product_sup == Approx(std::pow(1e-3, 0.2)).epsilon(1e-14));
    CHECK_FALSE(smooth.flagged);
}
