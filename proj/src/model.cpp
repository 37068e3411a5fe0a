#include "ctwa/model.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace ctwa {

std::vector<double> uniform_grid(double t_max, int n_times) {
    if (n_times < 1) throw ConfigError("n_times must be >= 1");
    if (n_times == 1) return {0.0};
    if (!(t_max > 0.0)) throw ConfigError("t_max must be > 0 when n_times > 1");
    std::vector<double> grid(static_cast<std::size_t>(n_times));
    for (int i = 0; i < n_times; ++i) grid[static_cast<std::size_t>(i)] = t_max * i / (n_times - 1);
    return grid;
}

std::vector<long> grid_steps(const std::vector<double>& t_grid, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    std::vector<long> steps;
    steps.reserve(t_grid.size());
    for (double t : t_grid) {
        const double k = std::round(t / dt);
        if (t < 0.0 || std::abs(k * dt - t) > 1e-9 * std::max(1.0, t))
            throw ConfigError("grid time " + format_exact(t) + " is not a multiple of dt");
        if (!steps.empty() && static_cast<long>(k) < steps.back())
            throw ConfigError("time grid must be ascending");
        steps.push_back(static_cast<long>(k));
    }
    return steps;
}

std::string format_exact(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

SpectralDensity SpectralDensity::underdamped(double a2p, double gamma, double omega, double temperature,
                                             Branch branch) {
    SpectralDensity s;
    s.family = BathFamily::Underdamped;
    s.branch = branch;
    s.coupling = a2p;
    s.gamma = gamma;
    s.omega = omega;
    s.temperature = temperature;
    s.validate();
    return s;
}

SpectralDensity SpectralDensity::drude(double a1p, double gamma, double temperature) {
    SpectralDensity s;
    s.family = BathFamily::Drude;
    s.coupling = a1p;
    s.gamma = gamma;
    s.omega = 0.0;
    s.temperature = temperature;
    s.validate();
    return s;
}

double SpectralDensity::shifted_frequency_sq() const {
    if (family == BathFamily::Drude) return gamma * gamma;
    const double sign = branch == Branch::Trig ? 1.0 : -1.0;
    return gamma * gamma + sign * omega * omega;
}

double SpectralDensity::a1() const {
    return family == BathFamily::Drude ? gamma * coupling : 0.0;
}

double SpectralDensity::a2() const {
    return family == BathFamily::Underdamped ? shifted_frequency_sq() / omega * coupling : 0.0;
}

Complex SpectralDensity::spectral_density(Complex w) const {
    if (family == BathFamily::Drude) return coupling * 2.0 * gamma * w / (gamma * gamma + w * w);
    const double w2 = shifted_frequency_sq();
    const Complex d = w2 - w * w;
    return coupling * 4.0 * w2 * gamma * w / (d * d + 4.0 * gamma * gamma * w * w);
}

void SpectralDensity::validate() const {
    if (!(gamma > 0.0)) throw ConfigError("bath gamma must be > 0");
    if (!(coupling >= 0.0)) throw ConfigError("bath coupling a' must be >= 0");
    if (!(temperature > 0.0)) throw ConfigError("bath temperature must be > 0");
    if (family == BathFamily::Underdamped) {
        if (!(omega > 0.0)) throw ConfigError("underdamped bath requires omega > 0");
        if (branch == Branch::Hyp && !(gamma > omega))
            throw ConfigError("hyperbolic branch requires gamma > omega");
    }
}

double reorganization_energy(const SpectralDensity& bath) {
    // only one of a1', a2' is nonzero per family
    return bath.coupling;
}

void SystemModel::validate() const {
    if (h.rows() == 0 || h.rows() != h.cols()) throw ConfigError("h must be a non-empty square matrix");
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-14 * scale) throw ConfigError("h must be Hermitian");
    if (static_cast<int>(baths.size()) != n_sites())
        throw ConfigError("expected one bath per site (" + std::to_string(n_sites()) + "), got " +
                          std::to_string(baths.size()));
    for (const auto& b : baths) b.validate();
}

SystemModel build_donor_acceptor(double delta, double h12, const SpectralDensity& bath) {
    SystemModel m;
    m.h.resize(2, 2);
    m.h << delta, h12, h12, 0.0;
    m.baths = {bath, bath};
    m.validate();
    return m;
}

SpectralDensity BenchmarkConfig::bath() const {
    if (family == BathFamily::Drude) return SpectralDensity::drude(a1p, gamma, temperature);
    return SpectralDensity::underdamped(a2p, gamma, omega, temperature);
}

std::string BenchmarkConfig::serialize() const {
    std::ostringstream os;
    os << "name = " << name << '\n'
       << "delta = " << format_exact(delta) << '\n'
       << "h12 = " << format_exact(h12) << '\n'
       << "temperature = " << format_exact(temperature) << '\n'
       << "family = " << to_string(family) << '\n'
       << "gamma = " << format_exact(gamma) << '\n'
       << "omega = " << format_exact(omega) << '\n'
       << "a1 = " << format_exact(a1p) << '\n'
       << "a2 = " << format_exact(a2p) << '\n'
       << "initial_site = " << initial_site << '\n';
    return os.str();
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("field '" + key + "': cannot parse '" + v + "' as a number");
    return x;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

BenchmarkConfig BenchmarkConfig::deserialize(const std::string& text) {
    BenchmarkConfig c;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed preset line: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "name") c.name = val;
        else if (key == "delta") c.delta = parse_double(key, val);
        else if (key == "h12") c.h12 = parse_double(key, val);
        else if (key == "temperature") c.temperature = parse_double(key, val);
        else if (key == "family") c.family = bath_family_from_string(val);
        else if (key == "gamma") c.gamma = parse_double(key, val);
        else if (key == "omega") c.omega = parse_double(key, val);
        else if (key == "a1") c.a1p = parse_double(key, val);
        else if (key == "a2") c.a2p = parse_double(key, val);
        else if (key == "initial_site") c.initial_site = static_cast<int>(parse_double(key, val));
        else throw ConfigError("unknown preset field '" + key + "'");
    }
    return c;
}

namespace {

// 0.1 -> "01", 0.5 -> "05", 1 -> "1", 2 -> "2"
std::string tag(double x) {
    std::string s = format_exact(x);
    std::erase(s, '.');
    return s;
}

std::vector<BenchmarkConfig> make_presets() {
    std::vector<BenchmarkConfig> out;
    // Drude baths (Omega = a2' = 0); a1' is not fixed by the figure and defaults to 0.1.
    for (double g : {0.1, 1.0}) {
        BenchmarkConfig c;
        c.name = "fig1-g" + tag(g);
        c.family = BathFamily::Drude;
        c.gamma = g;
        c.a1p = 0.1;
        out.push_back(c);
    }
    // Underdamped trig baths, a2' = 0.1, a1' = 0; Omega = 0.1 column with varying gamma,
    // gamma = 1 column with varying Omega. fig3 repeats the grid at T = 0.2.
    const std::vector<std::pair<double, double>> grid = {{0.2, 0.1}, {1.0, 0.1}, {2.0, 0.1}, {1.0, 0.5}, {1.0, 2.0}};
    for (auto [fig, temp] : {std::pair{2, 2.0}, std::pair{3, 0.2}}) {
        for (auto [g, w] : grid) {
            BenchmarkConfig c;
            c.name = "fig" + std::to_string(fig) + "-g" + tag(g) + "-O" + tag(w);
            c.family = BathFamily::Underdamped;
            c.gamma = g;
            c.omega = w;
            c.a2p = 0.1;
            c.temperature = temp;
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace

const std::vector<BenchmarkConfig>& benchmark_presets() {
    static const std::vector<BenchmarkConfig> presets = make_presets();
    return presets;
}

BenchmarkConfig find_preset(const std::string& name) {
    for (const auto& p : benchmark_presets())
        if (p.name == name) return p;
    std::string known;
    for (const auto& p : benchmark_presets()) known += " " + p.name;
    throw ConfigError("unknown preset '" + name + "'; known:" + known);
}

std::string to_string(BathFamily family) { return family == BathFamily::Drude ? "drude" : "underdamped"; }
std::string to_string(Branch branch) { return branch == Branch::Trig ? "trig" : "hyp"; }

BathFamily bath_family_from_string(const std::string& s) {
    if (s == "drude") return BathFamily::Drude;
    if (s == "underdamped") return BathFamily::Underdamped;
    throw ConfigError("unknown bath family '" + s + "' (expected drude|underdamped)");
}

Branch branch_from_string(const std::string& s) {
    if (s == "trig") return Branch::Trig;
    if (s == "hyp") return Branch::Hyp;
    throw ConfigError("unknown branch '" + s + "' (expected trig|hyp)");
}

}  // namespace ctwa
