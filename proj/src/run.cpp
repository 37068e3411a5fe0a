#include "ctwa/run.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ctwa {

std::string software_version() { return CTWA_VERSION; }

std::string to_string(RunMethod m) {
    switch (m) {
        case RunMethod::Twa: return "twa";
        case RunMethod::Ctwa: return "ctwa";
        case RunMethod::Exact: return "exact";
        case RunMethod::Heom: return "heom";
        case RunMethod::DephasingOracle: return "dephasing-oracle";
        case RunMethod::Closed: return "closed";
    }
    return "?";
}

RunMethod run_method_from_string(const std::string& s) {
    for (RunMethod m : {RunMethod::Twa, RunMethod::Ctwa, RunMethod::Exact, RunMethod::Heom, RunMethod::DephasingOracle,
                        RunMethod::Closed})
        if (to_string(m) == s) return m;
    throw ConfigError("field 'method': unknown method '" + s +
                      "' (expected twa|ctwa|exact|heom|dephasing-oracle|closed)");
}

bool is_stochastic(RunMethod m) { return m == RunMethod::Twa || m == RunMethod::Ctwa || m == RunMethod::Exact; }

namespace {

Method stochastic_method(RunMethod m) {
    if (m == RunMethod::Twa) return Method::Twa;
    if (m == RunMethod::Ctwa) return Method::Ctwa;
    return Method::Exact;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("field '" + key + "': cannot parse '" + v + "' as a number");
    return x;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
    Int x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("field '" + key + "': cannot parse '" + v + "' as an integer");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("field '" + key + "': expected true|false, got '" + v + "'");
}

// Rethrows a ConfigError from `f` with the field name attached.
template <class F>
auto with_field(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind("field '", 0) == 0) throw;
        throw ConfigError("field '" + key + "': " + msg);
    }
}

Matrix parse_matrix(const std::string& key, const std::string& text) {
    const auto rows = split(text, ';');
    std::vector<std::vector<double>> vals;
    for (const auto& row : rows) {
        vals.emplace_back();
        for (const auto& entry : split(row, ',')) vals.back().push_back(to_double(key, entry));
    }
    const auto n = static_cast<Eigen::Index>(vals.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(vals[i].size()) != n)
            throw ConfigError("field '" + key + "': expected a square matrix written as rows 'a, b; c, d'");
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = vals[i][j];
    }
    return m;
}

std::string format_matrix(const Matrix& m) {
    std::string s;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) s += "; ";
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) s += ", ";
            s += format_exact(m(i, j));
        }
    }
    return s;
}

using KeyValues = std::map<std::string, std::string>;

struct ParsedText {
    KeyValues top;
    KeyValues bath_all;
    std::map<int, KeyValues> bath_site;  // 1-based
};

ParsedText split_sections(const std::string& text) {
    ParsedText p;
    KeyValues* cur = &p.top;
    std::string section = "";
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section == "bath") {
                cur = &p.bath_all;
            } else if (section.rfind("bath.", 0) == 0) {
                const int n = to_int<int>("[" + section + "]", section.substr(5));
                if (n < 1) throw ConfigError("section [" + section + "]: site index is 1-based");
                cur = &p.bath_site[n];
            } else {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string qualified = section.empty() ? key : section + "." + key;
        if (!cur->emplace(key, trim(line.substr(eq + 1))).second)
            throw ConfigError("field '" + qualified + "' given twice");
    }
    return p;
}

void apply_bath_fields(SpectralDensity& b, const KeyValues& kv, const std::string& prefix) {
    for (const auto& [key, val] : kv) {
        const std::string name = prefix + "." + key;
        if (key == "family") b.family = with_field(name, [&] { return bath_family_from_string(val); });
        else if (key == "branch") b.branch = with_field(name, [&] { return branch_from_string(val); });
        else if (key == "coupling") b.coupling = to_double(name, val);
        else if (key == "gamma") b.gamma = to_double(name, val);
        else if (key == "omega") b.omega = to_double(name, val);
        else throw ConfigError("unknown field '" + name + "'");
    }
    if (b.family == BathFamily::Drude) b.omega = 0.0;
}

constexpr const char* kDefaultPreset = "fig2-g1-O01";

}  // namespace

void apply_preset(RunConfig& cfg, const std::string& name) {
    const BenchmarkConfig p = with_field("preset", [&] { return find_preset(name); });
    const SystemModel m = p.model();
    cfg.preset = name;
    cfg.h = m.h;
    cfg.temperature = p.temperature;
    cfg.baths = m.baths;
    cfg.initial_site = p.initial_site - 1;
}

RunConfig::RunConfig() {
    apply_preset(*this, kDefaultPreset);
    preset.clear();
}

SystemModel RunConfig::model() const {
    SystemModel m;
    m.h = h;
    m.baths = baths;
    for (auto& b : m.baths) b.temperature = temperature;
    return m;
}

CMatrix RunConfig::initial_density() const {
    return initial_state == "plus" ? plus_state(n_sites()) : site_state(n_sites(), initial_site);
}

void RunConfig::validate() const {
    with_field("h", [&] {
        if (h.rows() == 0 || h.rows() != h.cols()) throw ConfigError("must be a non-empty square matrix");
        const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
        if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-14 * scale) throw ConfigError("must be Hermitian");
        return 0;
    });
    if (!(temperature > 0.0)) throw ConfigError("field 'temperature': must be > 0");
    if (static_cast<int>(baths.size()) != n_sites())
        throw ConfigError("field 'bath': expected one bath per site (" + std::to_string(n_sites()) + ")");
    for (std::size_t n = 0; n < baths.size(); ++n) {
        SpectralDensity b = baths[n];
        b.temperature = temperature;
        with_field("bath." + std::to_string(n + 1), [&] {
            b.validate();
            return 0;
        });
    }
    if (initial_site < 0 || initial_site >= n_sites())
        throw ConfigError("field 'initial_site': must be in 1.." + std::to_string(n_sites()));
    if (initial_state != "site" && initial_state != "plus")
        throw ConfigError("field 'initial_state': expected site|plus, got '" + initial_state + "'");
    if (initial_state == "plus" && is_stochastic(method))
        throw ConfigError("field 'initial_state': plus is only available for heom, dephasing-oracle and closed");
    if (!high_temperature && matsubara < 0) throw ConfigError("field 'matsubara': must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("field 'dt': must be > 0");
    if (n_times < 1) throw ConfigError("field 'n_times': must be >= 1");
    if (n_times > 1 && !(t_max > 0.0)) throw ConfigError("field 't_max': must be > 0");
    if (is_stochastic(method) || method == RunMethod::Heom)
        with_field("dt", [&] { return grid_steps(t_grid(), dt); });
    if (is_stochastic(method) && n_traj < 1) throw ConfigError("field 'n_traj': must be >= 1");
    if (workers < 0) throw ConfigError("field 'workers': must be >= 0");
    if (method == RunMethod::Heom) {
        if (heom_depth < 1) throw ConfigError("field 'heom_depth': must be >= 1");
        if (heom_max_depth < heom_depth) throw ConfigError("field 'heom_max_depth': must be >= heom_depth");
        if (!(heom_tol > 0.0)) throw ConfigError("field 'heom_tol': must be > 0");
    }
    if (method == RunMethod::DephasingOracle) {
        CMatrix off = h;
        off.diagonal().setZero();
        if (off.cwiseAbs().maxCoeff() != 0.0)
            throw ConfigError("field 'h': dephasing-oracle needs a diagonal Hamiltonian");
    }
    if (method == RunMethod::Exact) {
        if (!(table.dx > 0.0) || !(table.dr > 0.0) || !(table.x_max > table.x_min) || !(table.r_max > table.dr) ||
            table.rho_panels < 1)
            throw ConfigError("field 'table': invalid pseudo-density grid");
    }
}

namespace {

std::string serialize_impl(const RunConfig& c, bool runtime_fields) {
    std::ostringstream os;
    if (!c.preset.empty()) os << "preset = " << c.preset << '\n';
    os << "method = " << to_string(c.method) << '\n';
    os << "h = " << format_matrix(c.h.real()) << '\n';
    if (c.h.imag().cwiseAbs().maxCoeff() != 0.0) os << "h_im = " << format_matrix(c.h.imag()) << '\n';
    os << "temperature = " << format_exact(c.temperature) << '\n'
       << "initial_site = " << c.initial_site + 1 << '\n'
       << "initial_state = " << c.initial_state << '\n'
       << "high_temperature = " << (c.high_temperature ? "true" : "false") << '\n'
       << "matsubara = " << c.matsubara << '\n'
       << "dt = " << format_exact(c.dt) << '\n'
       << "t_max = " << format_exact(c.t_max) << '\n'
       << "n_times = " << c.n_times << '\n'
       << "linear_step = " << (c.linear == LinearStep::Euler ? "euler" : "exponential") << '\n'
       << "n_traj = " << c.n_traj << '\n'
       << "seed = " << c.seed << '\n'
       << "heom_depth = " << c.heom_depth << '\n'
       << "heom_max_depth = " << c.heom_max_depth << '\n'
       << "heom_tol = " << format_exact(c.heom_tol) << '\n'
       << "table_x_min = " << format_exact(c.table.x_min) << '\n'
       << "table_x_max = " << format_exact(c.table.x_max) << '\n'
       << "table_dx = " << format_exact(c.table.dx) << '\n'
       << "table_r_max = " << format_exact(c.table.r_max) << '\n'
       << "table_dr = " << format_exact(c.table.dr) << '\n'
       << "table_rho_panels = " << c.table.rho_panels << '\n';
    if (runtime_fields) {
        os << "workers = " << c.workers << '\n' << "output = " << c.output << '\n';
        if (!c.table_cache.empty()) os << "table_cache = " << c.table_cache << '\n';
    }
    for (std::size_t n = 0; n < c.baths.size(); ++n) {
        const auto& b = c.baths[n];
        os << "\n[bath." << n + 1 << "]\n"
           << "family = " << to_string(b.family) << '\n'
           << "branch = " << to_string(b.branch) << '\n'
           << "coupling = " << format_exact(b.coupling) << '\n'
           << "gamma = " << format_exact(b.gamma) << '\n'
           << "omega = " << format_exact(b.omega) << '\n';
    }
    return os.str();
}

}  // namespace

std::string RunConfig::serialize() const { return serialize_impl(*this, true); }

RunConfig parse_config(const std::string& text) {
    const ParsedText p = split_sections(text);
    RunConfig c;
    const KeyValues& top = p.top;
    auto has = [&](const char* k) { return top.count(k) > 0; };

    // model
    if (has("h")) {
        if (has("delta") || has("h12")) throw ConfigError("field 'h': cannot be combined with delta/h12");
        Matrix re = parse_matrix("h", top.at("h"));
        Matrix im = Matrix::Zero(re.rows(), re.cols());
        if (has("h_im")) {
            im = parse_matrix("h_im", top.at("h_im"));
            if (im.rows() != re.rows()) throw ConfigError("field 'h_im': size differs from h");
        }
        c.h = re.cast<Complex>() + Complex(0.0, 1.0) * im.cast<Complex>();
    } else {
        if (has("h_im")) throw ConfigError("field 'h_im': requires h");
        const double delta = has("delta") ? to_double("delta", top.at("delta")) : 1.0;
        const double h12 = has("h12") ? to_double("h12", top.at("h12")) : 0.4;
        c.h.resize(2, 2);
        c.h << delta, h12, h12, 0.0;
    }
    const int N = c.n_sites();
    if (has("temperature")) c.temperature = to_double("temperature", top.at("temperature"));
    SpectralDensity base = c.baths.front();
    apply_bath_fields(base, p.bath_all, "bath");
    c.baths.assign(static_cast<std::size_t>(N), base);
    for (const auto& [n, kv] : p.bath_site) {
        if (n > N) throw ConfigError("section [bath." + std::to_string(n) + "]: only " + std::to_string(N) + " sites");
        apply_bath_fields(c.baths[static_cast<std::size_t>(n - 1)], kv, "bath." + std::to_string(n));
    }
    if (has("initial_site")) c.initial_site = to_int<int>("initial_site", top.at("initial_site")) - 1;
    for (auto& b : c.baths) b.temperature = c.temperature;

    static const std::set<std::string> model_keys = {"h", "h_im", "delta", "h12", "temperature", "initial_site"};
    if (has("preset") && !top.at("preset").empty()) {
        RunConfig from_file = c;
        apply_preset(c, top.at("preset"));
        bool bath_keys = !p.bath_all.empty() || !p.bath_site.empty();
        if ((has("h") || has("delta") || has("h12")) && from_file.h != c.h) c.overridden.push_back("h");
        if (has("temperature") && from_file.temperature != c.temperature) c.overridden.push_back("temperature");
        if (has("initial_site") && from_file.initial_site != c.initial_site) c.overridden.push_back("initial_site");
        if (bath_keys && from_file.baths != c.baths) c.overridden.push_back("bath");
    }

    for (const auto& [key, val] : top) {
        if (model_keys.count(key) || key == "preset") continue;
        if (key == "method") c.method = run_method_from_string(val);
        else if (key == "initial_state") c.initial_state = val;
        else if (key == "high_temperature") c.high_temperature = to_bool(key, val);
        else if (key == "matsubara") c.matsubara = to_int<int>(key, val);
        else if (key == "dt") c.dt = to_double(key, val);
        else if (key == "t_max") c.t_max = to_double(key, val);
        else if (key == "n_times") c.n_times = to_int<int>(key, val);
        else if (key == "linear_step") {
            if (val == "exponential") c.linear = LinearStep::Exponential;
            else if (val == "euler") c.linear = LinearStep::Euler;
            else throw ConfigError("field 'linear_step': expected exponential|euler, got '" + val + "'");
        } else if (key == "n_traj") c.n_traj = to_int<long>(key, val);
        else if (key == "seed") c.seed = to_int<std::uint64_t>(key, val);
        else if (key == "workers") c.workers = to_int<int>(key, val);
        else if (key == "heom_depth") c.heom_depth = to_int<int>(key, val);
        else if (key == "heom_max_depth") c.heom_max_depth = to_int<int>(key, val);
        else if (key == "heom_tol") c.heom_tol = to_double(key, val);
        else if (key == "table_x_min") c.table.x_min = to_double(key, val);
        else if (key == "table_x_max") c.table.x_max = to_double(key, val);
        else if (key == "table_dx") c.table.dx = to_double(key, val);
        else if (key == "table_r_max") c.table.r_max = to_double(key, val);
        else if (key == "table_dr") c.table.dr = to_double(key, val);
        else if (key == "table_rho_panels") c.table.rho_panels = to_int<int>(key, val);
        else if (key == "table_cache") c.table_cache = val;
        else if (key == "output") c.output = val;
        else throw ConfigError("unknown field '" + key + "'");
    }
    return c;
}

RunConfig load_config_file(const std::string& path) { return parse_config(read_text_file(path)); }

std::string config_digest(const RunConfig& cfg) {
    // Runtime-only fields (workers, output, table cache) do not change results and are left out.
    const std::string text = serialize_impl(cfg, false);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunOutput run(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    RunOutput out;
    out.config = cfg;
    for (const auto& k : cfg.overridden) out.warnings.push_back("preset overrides config field '" + k + "'");

    const SystemModel model = cfg.model();
    for (const auto& b : model.baths) out.kernels.push_back(decompose(b, cfg.high_temperature, cfg.matsubara));
    const std::vector<double> grid = cfg.t_grid();
    const CMatrix rho0 = cfg.initial_density();

    auto take_record = [&](const DensityRecord& rec) {
        out.t = rec.t;
        out.mean = rec.rho;
    };

    switch (cfg.method) {
        case RunMethod::Twa:
        case RunMethod::Ctwa:
        case RunMethod::Exact: {
            for (std::size_t n = 0; n < model.baths.size(); ++n)
                out.maps.push_back(build_map(out.kernels[n], model.baths[n]));

            std::optional<PseudoDensityTable> table;
            if (cfg.method == RunMethod::Exact) {
                const Eigen::SelfAdjointEigenSolver<CMatrix> es(cfg.h);
                const double width = es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff();
                if (cfg.t_max * width > 1.0)
                    out.warnings.push_back("exact scheme with t_max * (spectral width) = " +
                                           format_exact(cfg.t_max * width) +
                                           " > 1: weights grow exponentially and may overflow");
                table = cfg.table_cache.empty() ? PseudoDensityTable(cfg.table)
                                                : PseudoDensityTable::load_or_build(cfg.table, cfg.table_cache);
            }

            EnsembleOptions opt;
            opt.n_traj = cfg.n_traj;
            opt.dt = cfg.dt;
            opt.t_grid = grid;
            opt.seed = cfg.seed;
            opt.workers = std::max(1, cfg.workers);
            opt.initial_site = cfg.initial_site;
            opt.linear = cfg.linear;
            opt.table = table ? &*table : nullptr;
            const EnsembleResult res = run_ensemble(stochastic_method(cfg.method), model, out.maps, opt);
            for (const auto& p : res.points) {
                out.t.push_back(p.t);
                out.mean.push_back(p.mean);
                out.se.push_back(p.se);
                out.avg_sign.push_back(p.avg_sign);
                out.ess.push_back(p.ess);
            }
            out.mean_log_weight = res.mean_log_weight;
            out.max_log_weight = res.max_log_weight;
            break;
        }
        case RunMethod::Heom: {
            HeomResult r = cfg.heom_depth == cfg.heom_max_depth
                               ? heom_propagate(model, out.kernels, cfg.heom_depth, cfg.dt, grid, rho0)
                               : heom_converged(model, out.kernels, cfg.dt, grid, rho0, cfg.heom_depth,
                                                cfg.heom_max_depth, cfg.heom_tol);
            take_record(r.record);
            r.record = {};
            out.heom = std::move(r);
            break;
        }
        case RunMethod::DephasingOracle: take_record(pure_dephasing(model, out.kernels, rho0, grid)); break;
        case RunMethod::Closed: take_record(closed_system(model, rho0, grid)); break;
    }
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::string format_csv(const RunOutput& out) {
    const int N = out.config.n_sites();
    const bool st = out.stochastic();
    std::ostringstream os;
    os << "# ctwa " << software_version() << '\n'
       << "# method = " << to_string(out.config.method) << '\n'
       << "# config_digest = " << config_digest(out.config) << '\n';
    if (!out.config.preset.empty()) os << "# preset = " << out.config.preset << '\n';
    if (st) os << "# n_traj = " << out.config.n_traj << "\n# seed = " << out.config.seed << '\n';
    os << 't';
    for (int n = 1; n <= N; ++n)
        for (int m = 1; m <= N; ++m) {
            const std::string name = "rho_" + std::to_string(n) + "_" + std::to_string(m);
            os << ',' << name << "_re," << name << "_im";
            if (st) os << ',' << name << "_se";
        }
    if (st) os << ",avg_sign";
    os << '\n';
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        os << format_exact(out.t[i]);
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < N; ++m) {
                const Complex z = out.mean[i](n, m);
                os << ',' << format_exact(z.real()) << ',' << format_exact(z.imag());
                if (st) os << ',' << format_exact(out.se[i](n, m));
            }
        if (st) os << ',' << format_exact(out.avg_sign[i]);
        os << '\n';
    }
    return os.str();
}

namespace {

using nlohmann::ordered_json;

ordered_json complex_json(Complex z) { return ordered_json::array({z.real(), z.imag()}); }

ordered_json matrix_json(const Matrix& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

ordered_json vector_json(const Vector& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

}  // namespace

std::string format_metadata(const RunOutput& out) {
    const RunConfig& c = out.config;
    ordered_json j;
    j["software"] = {{"name", "ctwa"}, {"version", software_version()}};
    j["config_digest"] = config_digest(c);
    j["config_text"] = c.serialize();

    ordered_json cfg;
    cfg["preset"] = c.preset;
    cfg["method"] = to_string(c.method);
    cfg["h_re"] = matrix_json(c.h.real());
    cfg["h_im"] = matrix_json(c.h.imag());
    cfg["temperature"] = c.temperature;
    cfg["initial_site"] = c.initial_site + 1;
    cfg["initial_state"] = c.initial_state;
    cfg["high_temperature"] = c.high_temperature;
    cfg["matsubara"] = c.matsubara;
    cfg["dt"] = c.dt;
    cfg["t_max"] = c.t_max;
    cfg["n_times"] = c.n_times;
    cfg["n_traj"] = c.n_traj;
    cfg["seed"] = c.seed;
    cfg["workers"] = c.workers;
    ordered_json baths = ordered_json::array();
    for (const auto& b : c.model().baths)
        baths.push_back({{"family", to_string(b.family)},
                         {"branch", to_string(b.branch)},
                         {"coupling", b.coupling},
                         {"gamma", b.gamma},
                         {"omega", b.omega},
                         {"reorganization_energy", reorganization_energy(b)}});
    cfg["baths"] = baths;
    j["config"] = cfg;

    ordered_json kernels = ordered_json::array();
    for (std::size_t n = 0; n < out.kernels.size(); ++n) {
        ordered_json terms = ordered_json::array();
        for (const auto& t : out.kernels[n].terms)
            terms.push_back({{"lambda", complex_json(t.lambda)},
                             {"alpha_f", complex_json(t.alpha_f)},
                             {"alpha_d", complex_json(t.alpha_d)},
                             {"matsubara", t.matsubara}});
        kernels.push_back({{"site", n + 1}, {"matsubara_cutoff", out.kernels[n].matsubara_cutoff}, {"terms", terms}});
    }
    j["kernels"] = kernels;

    ordered_json maps = ordered_json::array();
    for (std::size_t n = 0; n < out.maps.size(); ++n) {
        const auto& m = out.maps[n];
        maps.push_back({{"site", n + 1},
                        {"A", matrix_json(m.A)},
                        {"v", vector_json(m.v)},
                        {"eps", vector_json(m.eps)},
                        {"b", vector_json(m.b)},
                        {"b_tilde", vector_json(m.b_tilde)},
                        {"sigma", matrix_json(m.sigma)},
                        {"kappa", vector_json(m.kappa)}});
    }
    j["aux_maps"] = maps;

    ordered_json diag;
    if (out.stochastic()) {
        double min_sign = 1.0, min_ess = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < out.t.size(); ++i) {
            min_sign = std::min(min_sign, out.avg_sign[i]);
            min_ess = std::min(min_ess, out.ess[i]);
        }
        diag["min_avg_sign"] = min_sign;
        diag["min_ess"] = min_ess;
        if (c.method == RunMethod::Exact) {
            diag["mean_log_weight"] = out.mean_log_weight;
            diag["max_log_weight"] = out.max_log_weight;
        }
    }
    if (out.heom) {
        diag["heom_depth"] = out.heom->depth;
        diag["heom_n_ados"] = out.heom->n_ados;
        diag["heom_max_trace_error"] = out.heom->max_trace_error;
        diag["heom_max_hermiticity_error"] = out.heom->max_hermiticity_error;
        diag["heom_convergence_delta"] = out.heom->convergence_delta;
    }
    j["diagnostics"] = diag;
    j["warnings"] = out.warnings;
    j["wall_time_s"] = out.wall_time;
    return j.dump(2) + "\n";
}

RunConfig config_from_metadata(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("metadata: ") + e.what());
    }
    if (!j.contains("config_text") || !j["config_text"].is_string())
        throw ConfigError("field 'config_text': missing from metadata");
    return parse_config(j["config_text"].get<std::string>());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << text;
    if (!os) throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace ctwa
