#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ctwa/run.hpp"

namespace {

int resolve_workers(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("CTWA_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (const std::exception&) {
        }
        throw ctwa::ConfigError("CTWA_WORKERS: expected a positive integer, got '" + std::string(env) + "'");
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo exciton transport: TWA, CTWA, exact sign-weighted scheme and HEOM/analytic oracles"};
    app.set_version_flag("--version", ctwa::software_version());

    std::string config_path, replay_path, preset, method, output;
    std::optional<long> n_traj;
    std::optional<double> dt, t_max;
    std::optional<int> n_times, workers;
    std::optional<std::uint64_t> seed;
    bool quiet = false;

    app.add_option("--config", config_path, "Run config file (key = value, [bath] / [bath.N] sections)")
        ->check(CLI::ExistingFile);
    app.add_option("--replay", replay_path, "Re-run the config stored in a metadata sidecar")
        ->check(CLI::ExistingFile)
        ->excludes("--config");
    app.add_option("--preset", preset, "Benchmark preset; replaces all model fields");
    app.add_option("--method", method, "twa | ctwa | exact | heom | dephasing-oracle | closed");
    app.add_option("--n-traj", n_traj, "Number of trajectories");
    app.add_option("--dt", dt, "Time step");
    app.add_option("--t-max", t_max, "Final time");
    app.add_option("--n-times", n_times, "Number of output times on [0, t_max]");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--workers", workers, "Worker threads (default: config, then $CTWA_WORKERS, then 1)");
    app.add_option("--output", output, "CSV path; metadata goes to <output>.meta.json");
    app.add_flag("-q,--quiet", quiet, "No summary on stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        ctwa::RunConfig cfg;
        if (!replay_path.empty()) cfg = ctwa::config_from_metadata(ctwa::read_text_file(replay_path));
        else if (!config_path.empty()) cfg = ctwa::load_config_file(config_path);
        if (!preset.empty()) ctwa::apply_preset(cfg, preset);
        if (!method.empty()) cfg.method = ctwa::run_method_from_string(method);
        if (n_traj) cfg.n_traj = *n_traj;
        if (dt) cfg.dt = *dt;
        if (t_max) cfg.t_max = *t_max;
        if (n_times) cfg.n_times = *n_times;
        if (seed) cfg.seed = *seed;
        if (!output.empty()) cfg.output = output;
        if (workers) cfg.workers = *workers;
        cfg.workers = resolve_workers(cfg.workers);

        const ctwa::RunOutput out = ctwa::run(cfg);
        for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
        ctwa::write_text_file(cfg.output, ctwa::format_csv(out));
        ctwa::write_text_file(cfg.output + ".meta.json", ctwa::format_metadata(out));
        if (!quiet)
            std::cout << ctwa::to_string(cfg.method) << ": " << out.t.size() << " rows -> " << cfg.output << " ("
                      << out.wall_time << " s)\n";
        return 0;
    } catch (const ctwa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const ctwa::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const ctwa::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
