#include "tamed/experiment.hpp"

#include "tamed/error.hpp"
#include "tamed/rng.hpp"
#include "tamed/scheme.hpp"

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace tamed {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string where(const YAML::Node& node) {
    const auto mark = node.Mark();
    if (mark.line < 0) {
        return "";
    }
    return " (line " + std::to_string(mark.line + 1) + ")";
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw Error(ErrorKind::ParseError, "field '" + field + "'" + where(node) + ": unexpected value");
    }
}

double step_value(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) {
        throw Error(ErrorKind::ParseError, "field '" + field + "'" + where(node) + ": expected a step");
    }
    try {
        return parse_step(node.Scalar());
    } catch (const Error& e) {
        throw Error(ErrorKind::ParseError, "field '" + field + "'" + where(node) + ": " + e.what());
    }
}

std::vector<double> number_list(const YAML::Node& node, const std::string& field) {
    if (!node.IsSequence()) {
        throw Error(ErrorKind::ParseError, "field '" + field + "'" + where(node) + ": expected a list");
    }
    std::vector<double> out;
    for (const auto& item : node) {
        out.push_back(scalar<double>(item, field));
    }
    return out;
}

bool is_integer_multiple(double value, double unit) {
    const double ratio = value / unit;
    const double rounded = std::round(ratio);
    return rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-9 * rounded;
}

bool is_grid_step(double h) {
    const double inv = 1.0 / h;
    return std::abs(inv - std::round(inv)) <= 1e-9 * std::round(inv);
}

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw Error(ErrorKind::ValidationError, what);
    }
}

void validate(const ExperimentConfig& c) {
    require(!c.hurst_list.empty(), "hurst: at least one Hurst value is required");
    for (double H : c.hurst_list) {
        require(H > 0.0 && H < 1.0, "hurst: " + format_double(H) + " is not in (0,1)");
    }
    require(c.h_ref > 0.0 && c.h_ref < 0.5, "h_ref must lie in (0, 1/2)");
    require(is_grid_step(c.h_ref), "h_ref: 1/h_ref must be an integer");
    require(!c.h_list.empty(), "h_list: at least one step is required");
    for (double h : c.h_list) {
        require(h > 0.0 && h < 0.5, "h_list: step " + format_double(h) + " must satisfy 0 < h < 1/2");
        require(is_integer_multiple(h, c.h_ref),
                "h_list: step " + format_double(h) + " is not an integer multiple of h_ref");
    }
    require(c.n_paths >= 2, "n_paths must be at least 2");
    require(c.m >= 1, "m must be at least 1");
    for (const auto& pair : c.coupling) {
        require(pair.n >= 1, "coupling: n must be positive");
    }
    const DriftSpec spec = c.drift.build();
    require(c.x0.size() == spec.dim(), "x0 must have " + std::to_string(spec.dim()) + " components");
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

HurstRegime regime_from_string(const std::string& s) {
    if (s == to_string(HurstRegime::SubCritical)) return HurstRegime::SubCritical;
    if (s == to_string(HurstRegime::LimitCase)) return HurstRegime::LimitCase;
    if (s == to_string(HurstRegime::OutOfTheory)) return HurstRegime::OutOfTheory;
    throw Error(ErrorKind::ParseError, "unknown regime '" + s + "'");
}

std::string stem_for(const ExperimentConfig& config, double hurst) {
    return config.drift.build().label() + "_H" + format_double(hurst);
}

ordered_json sample_json(const ErrorSample& s, bool untamed) {
    ordered_json j;
    j["h"] = s.h;
    j["n"] = s.n;
    j["m"] = s.m;
    j["n_paths"] = s.n_paths;
    j["sup_error"] = s.sup_error_lm;
    j["stderr"] = s.std_error;
    j["untamed"] = untamed;
    return j;
}

// Runs `task(i)` for i in [0, count) on `workers` threads. Each thread claims
// the next unclaimed index, so the assignment of indices to threads varies but
// every index runs exactly once. The first failure (lowest index) is rethrown.
template <typename Task>
void parallel_for(std::size_t count, unsigned workers, Task&& task) {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mutex;
    std::size_t failed_index = count;
    std::exception_ptr failure;

    auto body = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) {
                return;
            }
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) {
        pool.emplace_back(body);
    }
    body();
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir) {
    write_file_atomic(dir / kManifestName, manifest_json(manifest));
}

std::optional<ManifestEntry> reload_entry(const RunManifest& previous, std::size_t hurst_index,
                                          const std::filesystem::path& dir) {
    for (const auto& entry : previous.entries) {
        if (entry.hurst_index != hurst_index) {
            continue;
        }
        std::error_code ec;
        if (!std::filesystem::exists(dir / entry.csv, ec)) {
            return std::nullopt;
        }
        if (entry.rate && !std::filesystem::exists(dir / entry.json, ec)) {
            return std::nullopt;
        }
        try {
            const auto samples = parse_error_table(read_file(dir / entry.csv));
            if (samples.size() != entry.samples.size()) {
                return std::nullopt;
            }
        } catch (const Error&) {
            return std::nullopt;
        }
        return entry;
    }
    return std::nullopt;
}

}  // namespace

DriftSpec DriftRecord::build() const {
    if (kind == "dirac") {
        std::vector<double> w = weight.empty() ? std::vector<double>(dim, 1.0) : weight;
        require(w.size() == dim, "drift.weight must have drift.dim entries");
        return DriftSpec::dirac(w);
    }
    if (kind == "indicator") {
        require(dim == 1, "drift 'indicator' is one-dimensional");
        return DriftSpec::indicator_half_line();
    }
    if (kind == "quadrant") {
        require(dim == 2, "drift 'quadrant' is two-dimensional");
        return DriftSpec::indicator_quadrant();
    }
    if (kind == "power") {
        require(dim == 1, "drift 'power' is one-dimensional");
        require(alpha > 0.0 && alpha < 1.0, "drift.alpha must lie in (0,1)");
        return DriftSpec::power_singularity(alpha);
    }
    if (kind == "linear") {
        require(dim == 1, "drift 'linear' is one-dimensional");
        return DriftSpec::linear(theta);
    }
    throw Error(ErrorKind::ValidationError, "unknown drift kind '" + kind + "'");
}

std::uint64_t ExperimentConfig::level_for(double h, const DriftSpec& spec) const {
    for (const auto& pair : coupling) {
        if (std::abs(pair.h - h) <= 1e-12 * h) {
            return pair.n;
        }
    }
    return coupling_n(h, spec);
}

double parse_step(const std::string& raw) {
    std::string text;
    for (char ch : raw) {
        if (!std::isspace(static_cast<unsigned char>(ch))) {
            text += ch;
        }
    }
    double scale = 1.0;
    std::string head = text;
    if (const auto star = text.find('*'); star != std::string::npos) {
        head = text.substr(0, star);
        scale = parse_step(text.substr(star + 1));
    }
    if (head.rfind("2^", 0) == 0) {
        const std::string exponent = head.substr(2);
        std::size_t used = 0;
        int k = 0;
        try {
            k = std::stoi(exponent, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != exponent.size()) {
            throw Error(ErrorKind::ParseError, "bad power of two '" + raw + "'");
        }
        return std::ldexp(1.0, k) * scale;
    }
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(head, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != head.size()) {
        throw Error(ErrorKind::ParseError, "bad step '" + raw + "'");
    }
    return value * scale;
}

ExperimentConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorKind::ParseError,
                    "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) {
        throw Error(ErrorKind::ParseError, "config must be a mapping");
    }

    static const std::vector<std::string> known = {"drift", "hurst", "h_list", "h_ref", "n_paths",
                                                   "m", "seed", "output_dir", "workers", "coupling",
                                                   "x0", "profile"};
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw Error(ErrorKind::ParseError, "unknown field '" + key + "'" + where(kv.first));
        }
    }
    for (const char* field : {"drift", "hurst", "h_list", "h_ref", "n_paths", "seed"}) {
        if (!root[field]) {
            throw Error(ErrorKind::ParseError, std::string("missing field '") + field + "'");
        }
    }

    ExperimentConfig c;
    const YAML::Node drift = root["drift"];
    if (!drift.IsMap() || !drift["kind"]) {
        throw Error(ErrorKind::ParseError, "field 'drift'" + where(drift) + ": expected a record with 'kind'");
    }
    c.drift.kind = scalar<std::string>(drift["kind"], "drift.kind");
    c.drift.dim = c.drift.kind == "quadrant" ? 2 : 1;
    if (drift["dim"]) {
        c.drift.dim = scalar<std::size_t>(drift["dim"], "drift.dim");
    }
    if (drift["weight"]) {
        c.drift.weight = drift["weight"].IsSequence() ? number_list(drift["weight"], "drift.weight")
                                                      : std::vector<double>(c.drift.dim, scalar<double>(drift["weight"], "drift.weight"));
    }
    if (drift["alpha"]) {
        c.drift.alpha = scalar<double>(drift["alpha"], "drift.alpha");
    }
    if (drift["theta"]) {
        c.drift.theta = scalar<double>(drift["theta"], "drift.theta");
    }

    const YAML::Node hurst = root["hurst"];
    c.hurst_list = hurst.IsSequence() ? number_list(hurst, "hurst")
                                      : std::vector<double>{scalar<double>(hurst, "hurst")};
    const YAML::Node steps = root["h_list"];
    if (!steps.IsSequence()) {
        throw Error(ErrorKind::ParseError, "field 'h_list'" + where(steps) + ": expected a list");
    }
    for (const auto& item : steps) {
        c.h_list.push_back(step_value(item, "h_list"));
    }
    c.h_ref = step_value(root["h_ref"], "h_ref");
    c.n_paths = scalar<std::size_t>(root["n_paths"], "n_paths");
    c.master_seed = scalar<std::uint64_t>(root["seed"], "seed");
    if (root["m"]) {
        c.m = scalar<int>(root["m"], "m");
    }
    if (root["output_dir"]) {
        c.output_dir = scalar<std::string>(root["output_dir"], "output_dir");
    }
    if (root["profile"]) {
        c.profile = scalar<std::string>(root["profile"], "profile");
    }
    if (const YAML::Node w = root["workers"]) {
        if (w.IsScalar() && w.Scalar() == "auto") {
            c.workers = 0;
        } else {
            c.workers = scalar<unsigned>(w, "workers");
            if (c.workers == 0) {
                throw Error(ErrorKind::ValidationError, "workers must be positive or \"auto\"");
            }
        }
    }
    if (const YAML::Node cp = root["coupling"]) {
        if (cp.IsScalar() && cp.Scalar() == "auto") {
            c.coupling.clear();
        } else if (cp.IsSequence()) {
            for (const auto& item : cp) {
                if (!item.IsMap() || !item["h"] || !item["n"]) {
                    throw Error(ErrorKind::ParseError, "field 'coupling'" + where(item) + ": expected {h, n}");
                }
                c.coupling.push_back({step_value(item["h"], "coupling.h"),
                                      scalar<std::uint64_t>(item["n"], "coupling.n")});
            }
        } else {
            throw Error(ErrorKind::ParseError, "field 'coupling'" + where(cp) + ": expected \"auto\" or a list");
        }
    }
    if (root["x0"]) {
        c.x0 = root["x0"].IsSequence() ? number_list(root["x0"], "x0")
                                       : std::vector<double>{scalar<double>(root["x0"], "x0")};
    } else {
        c.x0.assign(c.drift.dim, 0.0);
    }

    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    return parse_config(read_file(file));
}

std::string canonical_config(const ExperimentConfig& c) {
    ordered_json j;
    j["drift"] = {{"kind", c.drift.kind},
                  {"dim", c.drift.dim},
                  {"weight", c.drift.weight},
                  {"alpha", c.drift.alpha},
                  {"theta", c.drift.theta}};
    j["hurst"] = c.hurst_list;
    j["h_list"] = c.h_list;
    j["h_ref"] = c.h_ref;
    j["n_paths"] = c.n_paths;
    j["m"] = c.m;
    j["seed"] = c.master_seed;
    ordered_json coupling = ordered_json::array();
    for (const auto& p : c.coupling) {
        coupling.push_back({{"h", p.h}, {"n", p.n}});
    }
    j["coupling"] = coupling;
    j["x0"] = c.x0;
    j["profile"] = c.profile;
    return j.dump();
}

std::string config_hash(const ExperimentConfig& config) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical_config(config));
    return out.str();
}

std::vector<HypothesisRow> validate_hypotheses(const ExperimentConfig& config) {
    const DriftSpec spec = config.drift.build();
    const HurstAdmissibility adm = admissible_hurst(spec);
    const double coarsest = *std::max_element(config.h_list.begin(), config.h_list.end());

    std::vector<double> steps = config.h_list;
    std::sort(steps.begin(), steps.end(), std::greater<>());
    if (std::find(steps.begin(), steps.end(), config.h_ref) == steps.end()) {
        steps.push_back(config.h_ref);
    }

    std::vector<HypothesisRow> rows;
    for (double H : config.hurst_list) {
        const HurstParameter hurst(H);
        const HurstRegime regime = classify_hurst(spec, hurst);
        for (double h : steps) {
            HypothesisRow row;
            row.hurst = H;
            row.h = h;
            row.n = config.level_for(h, spec);
            row.reference = h == config.h_ref;
            row.regime = regime;
            row.h_max = adm.h_max;
            if (regime != HurstRegime::LimitCase) {
                row.theoretical_rate = theoretical_rate(spec);
            }
            row.taming = check_taming_condition(spec, hurst, h, row.n, coarsest);
            rows.push_back(row);
        }
    }
    return rows;
}

void print_hypotheses(std::ostream& out, const std::vector<HypothesisRow>& rows) {
    auto cell = [](double v) {
        std::ostringstream s;
        s << std::setprecision(5) << v;
        return s.str();
    };
    auto line = [&out](const std::vector<std::string>& cols) {
        static constexpr int widths[] = {7, 19, 9, 17, 8, 10, 14, 14};
        for (std::size_t i = 0; i < cols.size(); ++i) {
            out << std::left << std::setw(i < std::size(widths) ? widths[i] : 0) << cols[i];
        }
        out << '\n';
    };
    line({"H", "h", "n", "regime", "h_max", "rate", "sup*h^a", "C1*h^b", "taming"});
    for (const auto& r : rows) {
        std::string regime = to_string(r.regime);
        if (r.regime == HurstRegime::LimitCase) {
            regime += "*";
        }
        line({cell(r.hurst), cell(r.h) + (r.reference ? " (ref)" : ""), std::to_string(r.n), regime, cell(r.h_max),
              r.theoretical_rate ? cell(*r.theoretical_rate) : std::string("unquant."), cell(r.taming.product_sup),
              cell(r.taming.product_c1), r.taming.flagged ? "UNTAMED" : "ok"});
    }
    out << "a = 1/2 - H, b = 1/2 + H - eta with eta = H/2\n";
    if (std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.regime == HurstRegime::LimitCase; })) {
        out << "* limit case: the rate constant is not explicit, results are exploratory\n";
    }
}

namespace {

// JSON has no infinity; smooth drifts have h_max = inf.
ordered_json real_to_json(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double real_from_json(const ordered_json& v) {
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    return v.get<double>();
}

}  // namespace

std::string manifest_json(const RunManifest& m) {
    ordered_json j;
    j["config_hash"] = m.config_hash;
    j["version"] = m.version;
    j["drift"] = m.drift;
    j["seed"] = m.master_seed;
    j["wall_clock_seconds"] = m.wall_clock_seconds;
    j["partial"] = m.partial;
    if (!m.failure.empty()) {
        j["failure"] = m.failure;
    }
    ordered_json diags = ordered_json::array();
    for (const auto& r : m.diagnostics) {
        ordered_json d;
        d["hurst"] = r.hurst;
        d["h"] = r.h;
        d["n"] = r.n;
        d["reference"] = r.reference;
        d["regime"] = to_string(r.regime);
        d["h_max"] = real_to_json(r.h_max);
        if (r.theoretical_rate) {
            d["theoretical_rate"] = real_to_json(*r.theoretical_rate);
        } else {
            d["theoretical_rate"] = "unquantified";
        }
        d["taming"] = {{"eta", real_to_json(r.taming.eta)},
                       {"product_sup", real_to_json(r.taming.product_sup)},
                       {"product_c1", real_to_json(r.taming.product_c1)},
                       {"reference_h", real_to_json(r.taming.reference_h)},
                       {"flagged", r.taming.flagged}};
        diags.push_back(d);
    }
    j["diagnostics"] = diags;
    ordered_json entries = ordered_json::array();
    for (const auto& e : m.entries) {
        ordered_json o;
        o["hurst"] = e.hurst;
        o["hurst_index"] = e.hurst_index;
        o["regime"] = to_string(e.regime);
        o["csv"] = e.csv;
        if (e.rate) {
            o["json"] = e.json;
            o["rate"] = {{"slope", e.rate->slope},
                         {"slope_stderr", e.rate->slope_stderr},
                         {"intercept", e.rate->intercept},
                         {"theoretical_rate", e.rate->theoretical}};
        } else {
            o["rate"] = "undefined";
            o["rate_error"] = e.rate_error;
        }
        ordered_json samples = ordered_json::array();
        for (std::size_t i = 0; i < e.samples.size(); ++i) {
            samples.push_back(sample_json(e.samples[i], i < e.untamed.size() && e.untamed[i]));
        }
        o["samples"] = samples;
        entries.push_back(o);
    }
    j["entries"] = entries;
    return j.dump(2) + '\n';
}

RunManifest parse_manifest(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        RunManifest m;
        m.config_hash = j.at("config_hash").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.drift = j.at("drift").get<std::string>();
        m.master_seed = j.at("seed").get<std::uint64_t>();
        m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
        m.partial = j.at("partial").get<bool>();
        m.failure = j.value("failure", "");
        for (const auto& d : j.at("diagnostics")) {
            HypothesisRow r;
            r.hurst = d.at("hurst").get<double>();
            r.h = d.at("h").get<double>();
            r.n = d.at("n").get<std::uint64_t>();
            r.reference = d.at("reference").get<bool>();
            r.regime = regime_from_string(d.at("regime").get<std::string>());
            r.h_max = real_from_json(d.at("h_max"));
            if (d.at("theoretical_rate") != "unquantified") {
                r.theoretical_rate = real_from_json(d.at("theoretical_rate"));
            }
            const auto& t = d.at("taming");
            r.taming.eta = real_from_json(t.at("eta"));
            r.taming.product_sup = real_from_json(t.at("product_sup"));
            r.taming.product_c1 = real_from_json(t.at("product_c1"));
            r.taming.reference_h = real_from_json(t.at("reference_h"));
            r.taming.flagged = t.at("flagged").get<bool>();
            m.diagnostics.push_back(r);
        }
        for (const auto& o : j.at("entries")) {
            ManifestEntry e;
            e.hurst = o.at("hurst").get<double>();
            e.hurst_index = o.at("hurst_index").get<std::size_t>();
            e.regime = regime_from_string(o.at("regime").get<std::string>());
            e.csv = o.at("csv").get<std::string>();
            for (const auto& s : o.at("samples")) {
                ErrorSample sample;
                sample.h = s.at("h").get<double>();
                sample.n = s.at("n").get<std::uint64_t>();
                sample.m = s.at("m").get<int>();
                sample.n_paths = s.at("n_paths").get<std::size_t>();
                sample.sup_error_lm = s.at("sup_error").get<double>();
                sample.std_error = s.at("stderr").get<double>();
                e.samples.push_back(sample);
                e.untamed.push_back(s.at("untamed").get<bool>());
            }
            const auto& rate = o.at("rate");
            if (rate.is_object()) {
                e.json = o.at("json").get<std::string>();
                RateReport report;
                report.samples = e.samples;
                report.slope = rate.at("slope").get<double>();
                report.slope_stderr = rate.at("slope_stderr").get<double>();
                report.intercept = rate.at("intercept").get<double>();
                report.theoretical = rate.at("theoretical_rate").get<double>();
                e.rate = report;
            } else {
                e.rate_error = o.value("rate_error", "");
            }
            m.entries.push_back(std::move(e));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("manifest: ") + e.what());
    }
}

RunManifest load_manifest(const std::filesystem::path& file) {
    return parse_manifest(read_file(file));
}

unsigned resolve_workers(const ExperimentConfig& config) {
    if (const char* env = std::getenv("TAMED_EULER_WORKERS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long value = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0' || value == 0) {
            throw Error(ErrorKind::ValidationError,
                        std::string("TAMED_EULER_WORKERS must be a positive integer, got '") + env + "'");
        }
        return static_cast<unsigned>(value);
    }
    if (config.workers > 0) {
        return config.workers;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    validate(config);
    const auto started = std::chrono::steady_clock::now();
    const DriftSpec spec = config.drift.build();
    const unsigned workers = resolve_workers(config);
    const std::filesystem::path& dir = config.output_dir;

    RunManifest manifest;
    manifest.config_hash = config_hash(config);
    manifest.version = version();
    manifest.drift = spec.label();
    manifest.master_seed = config.master_seed;
    manifest.partial = true;
    manifest.diagnostics = validate_hypotheses(config);

    std::optional<RunManifest> previous;
    std::error_code ec;
    if (std::filesystem::exists(dir / kManifestName, ec)) {
        try {
            RunManifest old = load_manifest(dir / kManifestName);
            if (old.config_hash == manifest.config_hash) {
                previous = std::move(old);
            }
        } catch (const Error&) {
            // unreadable manifest: start over
        }
    }

    const std::size_t ref_steps = static_cast<std::size_t>(std::round(1.0 / config.h_ref));
    const std::uint64_t ref_level = config.level_for(config.h_ref, spec);
    const MollifiedDrift ref_drift(spec, ref_level);
    std::vector<MollifiedDrift> coarse_drifts;
    std::vector<std::uint64_t> levels;
    for (double h : config.h_list) {
        levels.push_back(config.level_for(h, spec));
        coarse_drifts.emplace_back(spec, levels.back());
    }
    const double coarsest = *std::max_element(config.h_list.begin(), config.h_list.end());

    auto log = [&](const std::string& line) {
        if (options.log != nullptr) {
            *options.log << line << '\n' << std::flush;
        }
    };

    std::size_t computed = 0;
    try {
        for (std::size_t hi = 0; hi < config.hurst_list.size(); ++hi) {
            const double H = config.hurst_list[hi];
            const HurstParameter hurst(H);
            if (previous) {
                if (auto entry = reload_entry(*previous, hi, dir)) {
                    log("H=" + format_double(H) + ": complete in previous run, skipped");
                    manifest.entries.push_back(std::move(*entry));
                    continue;
                }
            }
            if (options.stop_after > 0 && computed == options.stop_after) {
                log("stopping early after " + std::to_string(computed) + " Hurst value(s)");
                write_manifest(manifest, dir);
                return manifest;
            }

            const SchemeConfig ref_config = make_scheme_config(spec, config.h_ref, ref_level, config.x0, hurst, coarsest);
            std::vector<SchemeConfig> coarse_configs;
            for (std::size_t k = 0; k < config.h_list.size(); ++k) {
                coarse_configs.push_back(
                    make_scheme_config(spec, config.h_list[k], levels[k], config.x0, hurst, coarsest));
            }

            const FbmGenerator generator(hurst, ref_steps, spec.dim());
            std::vector<std::vector<double>> deviations(config.h_list.size(),
                                                        std::vector<double>(config.n_paths));
            parallel_for(config.n_paths, workers, [&](std::size_t i) {
                const FbmPath path = generator.sample(stream_seed(config.master_seed, hi, i));
                const SchemeRun reference = run_scheme(ref_drift, ref_config, path);
                for (std::size_t k = 0; k < coarse_configs.size(); ++k) {
                    const SchemeRun coarse = run_scheme(coarse_drifts[k], coarse_configs[k], path);
                    deviations[k][i] = path_sup_deviation(coarse, reference);
                }
            });

            ManifestEntry entry;
            entry.hurst = H;
            entry.hurst_index = hi;
            entry.regime = classify_hurst(spec, hurst);
            for (std::size_t k = 0; k < config.h_list.size(); ++k) {
                entry.samples.push_back(summarize_deviations(config.h_list[k], levels[k], deviations[k], config.m));
                entry.untamed.push_back(coarse_configs[k].untamed);
            }
            const std::string stem = stem_for(config, H);
            entry.csv = stem + ".csv";
            try {
                RateReport report = rate_regression(entry.samples, theoretical_rate(spec));
                error_table_emit(report, {spec.label(), H, config.master_seed}, dir, stem);
                entry.json = stem + ".json";
                entry.rate = std::move(report);
                log("H=" + format_double(H) + ": slope " + format_double(entry.rate->slope) + " +- " +
                    format_double(entry.rate->slope_stderr));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::DegenerateDesign) {
                    throw;
                }
                write_file_atomic(dir / entry.csv, error_table_csv(entry.samples));
                entry.rate_error = e.what();
                log("H=" + format_double(H) + ": rate undefined (" + entry.rate_error + ")");
            }
            manifest.entries.push_back(std::move(entry));
            ++computed;
            write_manifest(manifest, dir);
        }
    } catch (const std::exception& e) {
        manifest.failure = e.what();
        manifest.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        try {
            write_manifest(manifest, dir);
        } catch (const Error&) {
            // the original failure is the one worth reporting
        }
        throw;
    }

    manifest.partial = false;
    manifest.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(manifest, dir);
    return manifest;
}

std::vector<std::filesystem::path> emit_plot_data(const RunManifest& manifest, const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> written;
    for (const auto& entry : manifest.entries) {
        if (entry.samples.empty()) {
            continue;
        }
        std::string out = kPlotHeader;
        out += '\n';
        double lo_h = entry.samples.front().h;
        double hi_h = lo_h;
        for (const auto& s : entry.samples) {
            lo_h = std::min(lo_h, s.h);
            hi_h = std::max(hi_h, s.h);
            const double log_err = s.sup_error_lm > 0.0 ? std::log(s.sup_error_lm) : -INFINITY;
            const double lower = s.sup_error_lm - s.std_error;
            const double band_lo = lower > 0.0 ? std::log(lower) : -INFINITY;
            const double band_hi = std::log(s.sup_error_lm + s.std_error);
            out += "point," + format_double(std::log(s.h)) + ',' + format_double(s.h) + ',' +
                   format_double(log_err) + ',' + format_double(band_lo) + ',' + format_double(band_hi) + '\n';
        }
        if (entry.rate) {
            const RateReport& r = *entry.rate;
            double mean_log_h = 0.0;
            for (const auto& s : entry.samples) {
                mean_log_h += std::log(s.h);
            }
            mean_log_h /= static_cast<double>(entry.samples.size());
            for (double h : {hi_h, lo_h}) {
                const double x = std::log(h);
                const double y = r.intercept + r.slope * x;
                const double spread = r.slope_stderr * std::abs(x - mean_log_h);
                out += "fit," + format_double(x) + ',' + format_double(h) + ',' + format_double(y) + ',' +
                       format_double(y - spread) + ',' + format_double(y + spread) + '\n';
            }
        }
        const std::string stem = entry.csv.substr(0, entry.csv.rfind('.'));
        const auto file = dir / (stem + "_plot.csv");
        write_file_atomic(file, out);
        written.push_back(file);
    }
    return written;
}

std::string version() {
    return TAMED_VERSION;
}

}  // namespace tamed
