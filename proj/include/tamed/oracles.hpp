#pragma once

// Reference solutions that never call into the scheme implementation. They
// consume only path values and closed forms, and link without tamed_scheme.

#include "tamed/drift.hpp"
#include "tamed/fbm.hpp"

#include <span>
#include <vector>

namespace tamed::oracle {

/// Pathwise solution of dX = -theta X dt + dB on the path's own grid,
///   X_t = x0 e^{-theta t} + B_t - theta int_0^t e^{-theta (t-s)} B_s ds,
/// with the integral by the trapezoid rule. Path must be one-dimensional.
std::vector<double> fractional_ou_exact(const FbmPath& path, double x0, double theta);

/// Textbook Euler-Maruyama X_{k+1} = X_k + h f(X_k) + (B_{t_{k+1}} - B_{t_k})
/// on every point of the path grid. Row-major (n_steps + 1) x dim.
std::vector<double> textbook_euler(const VectorField& field, const FbmPath& path, std::span<const double> x0);

/// The scheme written out as X_k = x0 + (h b(X_0) + ... + h b(X_{k-1})) + B_{t_k}
/// for every k, with each sum spelled out term by term. Only n_steps <= 8.
std::vector<double> small_grid_bruteforce(const MollifiedDrift& drift, const FbmPath& path,
                                          std::span<const double> x0);

}  // namespace tamed::oracle
