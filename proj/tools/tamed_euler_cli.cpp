#include "tamed/error.hpp"
#include "tamed/experiment.hpp"
#include "tamed/selftest.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(const tamed::Error& e) {
    switch (e.kind()) {
        case tamed::ErrorKind::ParseError:
        case tamed::ErrorKind::ValidationError:
        case tamed::ErrorKind::IoFailure:
            return kExitValidation;
        default:
            return kExitRuntime;
    }
}

int cmd_validate(const std::string& file) {
    const auto config = tamed::load_config(file);
    std::cout << "config " << file << " is valid (hash " << tamed::config_hash(config) << ")\n";
    tamed::print_hypotheses(std::cout, tamed::validate_hypotheses(config));
    return 0;
}

int cmd_run(const std::string& file) {
    const auto config = tamed::load_config(file);
    tamed::print_hypotheses(std::cout, tamed::validate_hypotheses(config));
    std::cout << "workers: " << tamed::resolve_workers(config) << '\n';
    try {
        const auto manifest = tamed::run_experiment(config, {&std::cout, 0});
        std::cout << "wrote " << (config.output_dir / tamed::kManifestName).string() << " in "
                  << manifest.wall_clock_seconds << " s\n";
    } catch (const std::exception& e) {
        std::cerr << "run failed, partial results kept in " << config.output_dir.string() << ": " << e.what()
                  << '\n';
        return kExitRuntime;
    }
    return 0;
}

int cmd_plot(const std::string& file, const std::string& out_dir) {
    const auto manifest = tamed::load_manifest(file);
    const std::filesystem::path dir =
        out_dir.empty() ? std::filesystem::path(file).parent_path() : std::filesystem::path(out_dir);
    const auto written = tamed::emit_plot_data(manifest, dir);
    if (written.empty()) {
        std::cerr << "manifest " << file << " has no completed entries, nothing written\n";
        return kExitValidation;
    }
    for (const auto& f : written) {
        std::cout << f.string() << '\n';
    }
    return 0;
}

int cmd_selftest() {
    const auto items = tamed::run_selftest(&std::cout);
    const bool ok = std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
    std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
    return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tamed Euler scheme for SDEs driven by fractional Brownian motion"};
    app.set_version_flag("--version", tamed::version());
    app.require_subcommand(1);

    std::string config_file;
    auto* run = app.add_subcommand("run", "run an experiment matrix and write error tables");
    run->add_option("config", config_file, "YAML or JSON config")->required();

    auto* validate = app.add_subcommand("validate", "check a config and print the hypothesis table");
    validate->add_option("config", config_file, "YAML or JSON config")->required();

    std::string manifest_file;
    std::string plot_dir;
    auto* plot = app.add_subcommand("plot-data", "write plot-ready CSV files from a manifest");
    plot->add_option("manifest", manifest_file, "manifest.json of a run")->required();
    plot->add_option("-o,--out", plot_dir, "output directory (default: next to the manifest)");

    auto* selftest = app.add_subcommand("selftest", "oracle suite and fBm covariance checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*run) return cmd_run(config_file);
        if (*validate) return cmd_validate(config_file);
        if (*plot) return cmd_plot(manifest_file, plot_dir);
        if (*selftest) return cmd_selftest();
    } catch (const tamed::Error& e) {
        std::cerr << "error [" << tamed::to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
