#pragma once

#include "tamed/drift.hpp"
#include "tamed/error_lab.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tamed {

/// Drift record as written in a config file, e.g. {kind: dirac, weight: [1.0]}.
struct DriftRecord {
    std::string kind;              // dirac | indicator | quadrant | power | linear
    std::vector<double> weight;    // dirac only
    std::size_t dim = 1;
    double alpha = 0.5;            // power only
    double theta = 1.0;            // linear only

    DriftSpec build() const;
};

struct CouplingPair {
    double h = 0.0;
    std::uint64_t n = 0;
};

struct ExperimentConfig {
    DriftRecord drift;
    std::vector<double> hurst_list;
    std::vector<double> h_list;
    double h_ref = 0.0;
    std::size_t n_paths = 0;
    int m = 2;
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir = "results";
    /// 0 means "auto" (hardware concurrency).
    unsigned workers = 0;
    /// Empty means "auto": n from the coupling rule for every step.
    std::vector<CouplingPair> coupling;
    /// Defaults to the origin.
    std::vector<double> x0;
    std::string profile = "desk";

    /// Mollification level used at step h (explicit pair or coupling_n).
    std::uint64_t level_for(double h, const DriftSpec& spec) const;
};

/// Parses a YAML document (JSON is accepted as well), applies defaults and validates.
/// Throws ParseError (with line or field) and ValidationError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Parses "0.015625", "2^-6" or "2^-7*1e-4".
double parse_step(const std::string& text);

/// FNV-1a over the canonical form of every field except workers and output_dir.
std::string config_hash(const ExperimentConfig& config);
std::string canonical_config(const ExperimentConfig& config);

struct HypothesisRow {
    double hurst = 0.0;
    double h = 0.0;
    std::uint64_t n = 0;
    bool reference = false;
    HurstRegime regime = HurstRegime::SubCritical;
    double h_max = 0.0;
    /// Empty when the rate is unquantified (limit case).
    std::optional<double> theoretical_rate;
    TamingDiagnostic taming;
};

/// One row per (H, h, n) of the matrix, reference step included. Taming
/// products are compared against the coarsest configured step.
std::vector<HypothesisRow> validate_hypotheses(const ExperimentConfig& config);
void print_hypotheses(std::ostream& out, const std::vector<HypothesisRow>& rows);

struct ManifestEntry {
    double hurst = 0.0;
    std::size_t hurst_index = 0;
    HurstRegime regime = HurstRegime::SubCritical;
    std::vector<ErrorSample> samples;
    std::vector<bool> untamed;  // parallel to samples
    /// Absent when the regression is degenerate ("undefined" in the manifest).
    std::optional<RateReport> rate;
    std::string rate_error;
    std::string csv;   // file names relative to the manifest directory
    std::string json;
};

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::string drift;
    std::uint64_t master_seed = 0;
    double wall_clock_seconds = 0.0;
    bool partial = false;
    std::string failure;
    std::vector<HypothesisRow> diagnostics;
    std::vector<ManifestEntry> entries;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string manifest_json(const RunManifest& manifest);
RunManifest parse_manifest(const std::string& json);
RunManifest load_manifest(const std::filesystem::path& file);

struct RunOptions {
    /// Progress and diagnostics; nullptr for silence.
    std::ostream* log = nullptr;
    /// Stop after this many Hurst values (simulates an interrupted run). 0 = no limit.
    std::size_t stop_after = 0;
};

/// Worker count after applying "auto" and the TAMED_EULER_WORKERS override.
unsigned resolve_workers(const ExperimentConfig& config);

/// Runs the whole matrix. Completed Hurst values are persisted as they finish
/// and skipped on a rerun with the same config hash. On failure the manifest
/// is written with partial = true before the exception propagates.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes `<stem>_plot.csv` next to each error table: one "point" row per
/// sample and two "fit" rows. Returns the files written (none for an empty manifest).
std::vector<std::filesystem::path> emit_plot_data(const RunManifest& manifest,
                                                  const std::filesystem::path& dir);

inline constexpr const char* kPlotHeader = "kind,log_h,h,log_error,log_error_lo,log_error_hi";

/// Version string compiled into the library.
std::string version();

}  // namespace tamed
