#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctwa/ensemble.hpp"
#include "ctwa/oracles.hpp"

namespace ctwa {

enum class RunMethod { Twa, Ctwa, Exact, Heom, DephasingOracle, Closed };

std::string to_string(RunMethod m);
RunMethod run_method_from_string(const std::string& s);
bool is_stochastic(RunMethod m);

/// Resolved run configuration.
///
/// Text format: `key = value` lines, `#` comments, a `[bath]` section applying to every site and
/// `[bath.N]` sections (1-based N) overriding single fields for one site. Sites are 1-based in the
/// text and 0-based here. A `preset` replaces all model fields (h, temperature, baths, initial site).
struct RunConfig {
    std::string preset;
    RunMethod method = RunMethod::Ctwa;

    CMatrix h;
    double temperature = 2.0;
    std::vector<SpectralDensity> baths;  ///< one per site; their temperature mirrors `temperature`
    int initial_site = 0;
    std::string initial_state = "site";  ///< site | plus (plus: deterministic methods only)

    bool high_temperature = true;
    int matsubara = 0;

    double dt = 1e-3;
    double t_max = 1.0;
    int n_times = 11;
    LinearStep linear = LinearStep::Exponential;

    long n_traj = 1000;
    std::uint64_t seed = 0;
    int workers = 0;  ///< 0: unset (the CLI falls back to $CTWA_WORKERS, run() to 1)

    int heom_depth = 4;
    int heom_max_depth = 40;
    double heom_tol = 1e-4;

    TableParams table;
    std::string table_cache;  ///< empty: build the exact-scheme table in memory

    std::string output = "out.csv";

    /// Model keys that a preset overrode with a different value.
    std::vector<std::string> overridden;

    RunConfig();

    int n_sites() const { return static_cast<int>(h.rows()); }
    SystemModel model() const;
    std::vector<double> t_grid() const { return uniform_grid(t_max, n_times); }
    CMatrix initial_density() const;
    /// Throws ConfigError naming the offending field.
    void validate() const;

    /// Canonical text; parse_config(serialize()) reproduces every field bit-exactly.
    std::string serialize() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);
/// Replaces the model fields of `cfg` by those of preset `name`.
void apply_preset(RunConfig& cfg, const std::string& name);

/// 64-bit FNV-1a of serialize(), as 16 hex digits.
std::string config_digest(const RunConfig& cfg);

struct RunOutput {
    RunConfig config;
    std::vector<double> t;
    std::vector<CMatrix> mean;
    std::vector<Matrix> se;         ///< stochastic methods only
    std::vector<double> avg_sign;   ///< stochastic methods only
    std::vector<double> ess;        ///< stochastic methods only
    std::vector<ExponentialKernel> kernels;
    std::vector<AuxBathMap> maps;   ///< stochastic methods only
    std::optional<HeomResult> heom; ///< record cleared; its densities are in `mean`
    double mean_log_weight = 0.0;
    double max_log_weight = 0.0;
    double wall_time = 0.0;
    std::vector<std::string> warnings;

    bool stochastic() const { return is_stochastic(config.method); }
};

/// Decomposes kernels, builds maps and runs the configured method.
RunOutput run(const RunConfig& cfg);

/// CSV: `#` header lines, then t, rho_n_m_re, rho_n_m_im[, rho_n_m_se] per element (row major,
/// 1-based), then avg_sign for stochastic methods.
std::string format_csv(const RunOutput& out);
/// JSON sidecar: resolved config (text and fields), kernel terms, map coefficients, diagnostics,
/// version and wall time.
std::string format_metadata(const RunOutput& out);
/// Config stored in a metadata sidecar.
RunConfig config_from_metadata(const std::string& json_text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

std::string software_version();

}  // namespace ctwa
