#pragma once

#include "tamed/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace tamed::detail {

inline constexpr double kQuadratureRelTol = 1e-8;
inline constexpr unsigned kQuadratureMaxDepth = 25;

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
};

/// Adaptive Gauss-Kronrod (15/31) on [a, b] without a convergence check, for
/// callers that judge the summed error of several pieces.
template <class F>
QuadratureResult integrate_piece(F&& f, double a, double b, double rel_tol = kQuadratureRelTol,
                                 unsigned max_depth = kQuadratureMaxDepth) {
    QuadratureResult r;
    if (b > a) {
        r.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, a, b, max_depth, rel_tol, &r.error, &r.l1);
    }
    return r;
}

inline void check_convergence(const QuadratureResult& r, const char* what, double rel_tol = kQuadratureRelTol) {
    if (!std::isfinite(r.value) || r.error > rel_tol * r.l1 + std::numeric_limits<double>::min()) {
        throw Error(ErrorKind::QuadratureNonConvergence,
                    std::string(what) + ": estimated error " + std::to_string(r.error) +
                        " exceeds relative target on L1 mass " + std::to_string(r.l1));
    }
}

/// Adaptive Gauss-Kronrod (15/31) on [a, b]. Throws QuadratureNonConvergence when
/// the error estimate exceeds rel_tol times the L1 norm of the integrand.
template <class F>
double integrate(F&& f, double a, double b, const char* what, double rel_tol = kQuadratureRelTol) {
    if (!(b > a)) {
        return 0.0;
    }
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, a, b, kQuadratureMaxDepth, rel_tol, &error, &l1);
    if (!std::isfinite(value) || error > rel_tol * l1 + std::numeric_limits<double>::min()) {
        throw Error(ErrorKind::QuadratureNonConvergence,
                    std::string(what) + ": estimated error " + std::to_string(error) +
                        " exceeds relative target on L1 mass " + std::to_string(l1));
    }
    return value;
}

}  // namespace tamed::detail
