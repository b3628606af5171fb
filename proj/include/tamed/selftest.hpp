#pragma once

#include "tamed/drift.hpp"
#include "tamed/error_lab.hpp"
#include "tamed/fbm.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tamed {

struct BrownianSanity {
    std::size_t n_paths = 0;
    double max_deviation = 0.0;
    /// Largest |X| seen, for scaling the deviation.
    double max_state = 0.0;
};

/// Runs the scheme and an independent textbook Euler-Maruyama loop on the same
/// Brownian increments (H = 1/2) and reports the largest pointwise difference.
BrownianSanity brownian_sanity(const DriftSpec& spec, double h, std::size_t n_paths, std::uint64_t seed);

struct OuOrderStudy {
    double hurst = 0.0;
    double theta = 0.0;
    double h_ref = 0.0;
    RateReport report;
};

/// Strong order of the scheme for dX = -theta X dt + dB against the exact
/// pathwise solution computed on the h_ref grid.
OuOrderStudy ou_strong_order(double hurst, double theta, double x0, const std::vector<double>& h_list,
                             double h_ref, std::size_t n_paths, std::uint64_t seed, int m = 2);

struct BruteForceStudy {
    std::size_t cases = 0;
    std::size_t mismatches = 0;
    std::string first_mismatch;
};

/// Randomised cases (drift kind, H, n, x0, n_steps <= 8) comparing the scheme
/// with the unrolled oracle bit for bit.
BruteForceStudy bruteforce_equivalence(std::size_t cases, std::uint64_t seed);

struct SelftestItem {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Oracle suite plus covariance checks, one item per check.
std::vector<SelftestItem> run_selftest(std::ostream* log = nullptr);

}  // namespace tamed
