#pragma once

#include "tamed/scheme.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tamed {

/// Monte Carlo estimate of sup_t ||X_t - X^{h,n}_t||_{L^m} at one step size.
struct ErrorSample {
    double h = 0.0;
    std::uint64_t n = 0;
    std::size_t n_paths = 0;
    double sup_error_lm = 0.0;
    double std_error = 0.0;
    int m = 2;
};

struct RateReport {
    std::vector<ErrorSample> samples;
    double slope = 0.0;
    double slope_stderr = 0.0;
    double intercept = 0.0;
    double theoretical = 0.0;
};

/// max over the coarse grid of |X^ref_t - X^coarse_t| for one coupled pair.
double path_sup_deviation(const SchemeRun& coarse, const SchemeRun& reference);

/// Reduces per-path sup deviations e_i (in path-index order) to
/// ((1/N) sum e_i^m)^{1/m} with a delta-method standard error.
ErrorSample summarize_deviations(double h, std::uint64_t n, std::span<const double> deviations, int m);

/// Strong error between pairwise-coupled runs (same seed at every index).
ErrorSample strong_error(std::span<const SchemeRun> coarse_runs, std::span<const SchemeRun> reference_runs,
                         int m);

/// OLS fit of log(sup_error_lm) against log(h).
RateReport rate_regression(std::span<const ErrorSample> samples, double theoretical);

/// Context written next to a rate report.
struct ReportMeta {
    std::string drift;
    double hurst = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr const char* kErrorTableHeader = "h,n,m,n_paths,sup_error,stderr";

/// Shortest round-trip decimal of a double.
std::string format_double(double value);

std::string error_table_csv(std::span<const ErrorSample> samples);
std::string rate_summary_json(const RateReport& report, const ReportMeta& meta);

struct EmittedTable {
    std::filesystem::path csv;
    std::filesystem::path json;
};

/// Writes `<stem>.csv` and `<stem>.json` under `dir`, each via a temporary file
/// and rename so a reader never sees a half-written table.
EmittedTable error_table_emit(const RateReport& report, const ReportMeta& meta,
                              const std::filesystem::path& dir, const std::string& stem);

std::vector<ErrorSample> parse_error_table(const std::string& csv);

struct ParsedSummary {
    double slope = 0.0;
    double slope_stderr = 0.0;
    double intercept = 0.0;
    double theoretical_rate = 0.0;
    ReportMeta meta;
};

ParsedSummary parse_rate_summary(const std::string& json);

/// Writes `text` to `target` atomically (temporary file + rename).
void write_file_atomic(const std::filesystem::path& target, const std::string& text);
std::string read_file(const std::filesystem::path& source);

}  // namespace tamed
