#include "tamed/error_lab.hpp"

#include "tamed/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace tamed {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            compensation_ += (sum_ - t) + x;
        } else {
            compensation_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

double parse_double(std::string_view text, const char* field) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorKind::ParseError, std::string("bad number in field '") + field + "': " + std::string(text));
    }
    return value;
}

std::uint64_t parse_unsigned(std::string_view text, const char* field) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorKind::ParseError, std::string("bad integer in field '") + field + "': " + std::string(text));
    }
    return value;
}

}  // namespace

double path_sup_deviation(const SchemeRun& coarse, const SchemeRun& reference) {
    if (coarse.seed != reference.seed) {
        throw Error(ErrorKind::UncoupledRuns, "seed " + std::to_string(coarse.seed) + " vs " +
                                                  std::to_string(reference.seed));
    }
    if (coarse.dim != reference.dim) {
        throw Error(ErrorKind::GridMismatch, "coarse and reference dimensions differ");
    }
    const std::size_t coarse_steps = coarse.steps();
    const std::size_t fine_steps = reference.steps();
    if (fine_steps < coarse_steps || fine_steps % coarse_steps != 0) {
        throw Error(ErrorKind::GridMismatch, "reference grid does not refine the coarse grid");
    }
    const std::size_t stride = fine_steps / coarse_steps;
    const std::size_t d = coarse.dim;
    double worst = 0.0;
    for (std::size_t k = 0; k <= coarse_steps; ++k) {
        const auto xc = coarse.x(k);
        const auto xr = reference.x(k * stride);
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = xr[j] - xc[j];
            norm_sq += diff * diff;
        }
        worst = std::max(worst, std::sqrt(norm_sq));
    }
    return worst;
}

ErrorSample summarize_deviations(double h, std::uint64_t n, std::span<const double> deviations, int m) {
    if (m < 1) {
        throw Error(ErrorKind::InvalidArgument, "moment order m must be >= 1");
    }
    if (deviations.size() < 2) {
        throw Error(ErrorKind::InvalidArgument, "strong error needs at least 2 paths");
    }
    const double order = static_cast<double>(m);
    std::vector<double> powers(deviations.size());
    CompensatedSum sum;
    for (std::size_t i = 0; i < deviations.size(); ++i) {
        powers[i] = std::pow(deviations[i], order);
        if (!std::isfinite(powers[i])) {
            throw Error(ErrorKind::MomentOverflow, "e_i^m is not finite at path " + std::to_string(i));
        }
        sum.add(powers[i]);
    }
    const auto count = static_cast<double>(powers.size());
    const double mean = sum.value() / count;

    CompensatedSum squares;
    for (double p : powers) {
        squares.add((p - mean) * (p - mean));
    }
    const double variance = squares.value() / (count - 1.0);

    ErrorSample sample;
    sample.h = h;
    sample.n = n;
    sample.n_paths = deviations.size();
    sample.m = m;
    sample.sup_error_lm = std::pow(mean, 1.0 / order);
    // d/dmu mu^{1/m} = (1/m) mu^{1/m - 1}
    sample.std_error = mean > 0.0 ? sample.sup_error_lm / (order * mean) * std::sqrt(variance / count) : 0.0;
    return sample;
}

ErrorSample strong_error(std::span<const SchemeRun> coarse_runs, std::span<const SchemeRun> reference_runs,
                         int m) {
    if (coarse_runs.size() != reference_runs.size()) {
        throw Error(ErrorKind::UncoupledRuns, "coarse and reference run counts differ");
    }
    if (coarse_runs.empty()) {
        throw Error(ErrorKind::InvalidArgument, "no runs");
    }
    std::vector<double> deviations(coarse_runs.size());
    for (std::size_t i = 0; i < coarse_runs.size(); ++i) {
        deviations[i] = path_sup_deviation(coarse_runs[i], reference_runs[i]);
    }
    const SchemeConfig& c = coarse_runs.front().config;
    return summarize_deviations(c.h, c.n, deviations, m);
}

RateReport rate_regression(std::span<const ErrorSample> samples, double theoretical) {
    std::set<double> distinct;
    for (const auto& s : samples) {
        distinct.insert(s.h);
    }
    if (distinct.size() < 3) {
        throw Error(ErrorKind::DegenerateDesign,
                    "rate regression needs >= 3 distinct step sizes, got " + std::to_string(distinct.size()));
    }
    for (const auto& s : samples) {
        if (!(s.h > 0.0) || !(s.sup_error_lm > 0.0) || !std::isfinite(s.sup_error_lm)) {
            throw Error(ErrorKind::DegenerateDesign, "log-log regression needs positive finite errors");
        }
    }

    const auto count = static_cast<double>(samples.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (const auto& s : samples) {
        mean_x += std::log(s.h);
        mean_y += std::log(s.sup_error_lm);
    }
    mean_x /= count;
    mean_y /= count;

    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& s : samples) {
        const double dx = std::log(s.h) - mean_x;
        sxx += dx * dx;
        sxy += dx * (std::log(s.sup_error_lm) - mean_y);
    }

    RateReport report;
    report.samples.assign(samples.begin(), samples.end());
    report.theoretical = theoretical;
    report.slope = sxy / sxx;
    report.intercept = mean_y - report.slope * mean_x;

    double rss = 0.0;
    for (const auto& s : samples) {
        const double r = std::log(s.sup_error_lm) - report.intercept - report.slope * std::log(s.h);
        rss += r * r;
    }
    report.slope_stderr = std::sqrt(rss / (count - 2.0) / sxx);
    return report;
}

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc()) {
        throw Error(ErrorKind::IoFailure, "cannot format double");
    }
    return {buffer, ptr};
}

std::string error_table_csv(std::span<const ErrorSample> samples) {
    std::string out = kErrorTableHeader;
    out += '\n';
    for (const auto& s : samples) {
        out += format_double(s.h) + ',' + std::to_string(s.n) + ',' + std::to_string(s.m) + ',' +
               std::to_string(s.n_paths) + ',' + format_double(s.sup_error_lm) + ',' +
               format_double(s.std_error) + '\n';
    }
    return out;
}

std::string rate_summary_json(const RateReport& report, const ReportMeta& meta) {
    nlohmann::ordered_json j;
    j["slope"] = report.slope;
    j["slope_stderr"] = report.slope_stderr;
    j["intercept"] = report.intercept;
    j["theoretical_rate"] = report.theoretical;
    j["drift"] = meta.drift;
    j["hurst"] = meta.hurst;
    j["seed"] = meta.seed;
    return j.dump(2) + '\n';
}

void write_file_atomic(const std::filesystem::path& target, const std::string& text) {
    std::error_code ec;
    if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path(), ec);
        if (ec) {
            throw Error(ErrorKind::IoFailure, "cannot create " + target.parent_path().string() + ": " + ec.message());
        }
    }
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::IoFailure, "cannot open " + tmp.string());
        }
        out << text;
        out.flush();
        if (!out) {
            throw Error(ErrorKind::IoFailure, "write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        throw Error(ErrorKind::IoFailure, "cannot rename onto " + target.string() + ": " + ec.message());
    }
}

std::string read_file(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoFailure, "cannot open " + source.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

EmittedTable error_table_emit(const RateReport& report, const ReportMeta& meta,
                              const std::filesystem::path& dir, const std::string& stem) {
    EmittedTable out{dir / (stem + ".csv"), dir / (stem + ".json")};
    write_file_atomic(out.csv, error_table_csv(report.samples));
    write_file_atomic(out.json, rate_summary_json(report, meta));
    return out;
}

std::vector<ErrorSample> parse_error_table(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != kErrorTableHeader) {
        throw Error(ErrorKind::ParseError, "error table must start with header '" +
                                               std::string(kErrorTableHeader) + "'");
    }
    std::vector<ErrorSample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 6) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected 6 fields");
        }
        ErrorSample s;
        s.h = parse_double(fields[0], "h");
        s.n = parse_unsigned(fields[1], "n");
        s.m = static_cast<int>(parse_unsigned(fields[2], "m"));
        s.n_paths = parse_unsigned(fields[3], "n_paths");
        s.sup_error_lm = parse_double(fields[4], "sup_error");
        s.std_error = parse_double(fields[5], "stderr");
        samples.push_back(s);
    }
    return samples;
}

ParsedSummary parse_rate_summary(const std::string& json) {
    try {
        const auto j = nlohmann::json::parse(json);
        ParsedSummary s;
        s.slope = j.at("slope").get<double>();
        s.slope_stderr = j.at("slope_stderr").get<double>();
        s.intercept = j.at("intercept").get<double>();
        s.theoretical_rate = j.at("theoretical_rate").get<double>();
        s.meta.drift = j.at("drift").get<std::string>();
        s.meta.hurst = j.at("hurst").get<double>();
        s.meta.seed = j.at("seed").get<std::uint64_t>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("rate summary: ") + e.what());
    }
}

}  // namespace tamed
