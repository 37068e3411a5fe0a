#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctwa/types.hpp"

namespace ctwa {

enum class BathFamily { Underdamped, Drude };

/// (C, S) = (cos, sin) or (cosh, sinh) in the underdamped kernel.
enum class Branch { Trig, Hyp };

/// Spectral density of one site's bath.
///
/// Underdamped:  J'(w) = a2' * 4 (g^2 +- W^2) g w / ((g^2 +- W^2 - w^2)^2 + 4 g^2 w^2)
/// Drude:        J'(w) = a1' * 2 g w / (g^2 + w^2)
/// with J(w) = Theta(w) J'(w). `coupling` holds a2' or a1' depending on the family.
struct SpectralDensity {
    BathFamily family = BathFamily::Drude;
    Branch branch = Branch::Trig;
    double coupling = 0.0;  // a2' (underdamped) or a1' (Drude), energy units
    double gamma = 1.0;
    double omega = 0.0;  // ignored for Drude
    double temperature = 1.0;

    static SpectralDensity underdamped(double a2p, double gamma, double omega, double temperature,
                                       Branch branch = Branch::Trig);
    static SpectralDensity drude(double a1p, double gamma, double temperature);

    /// gamma^2 + Omega^2 (trig) or gamma^2 - Omega^2 (hyp); gamma^2 for Drude.
    double shifted_frequency_sq() const;
    /// Unprimed a1 coefficient of the dissipation kernel.
    double a1() const;
    /// Unprimed a2 coefficient of the dissipation kernel.
    double a2() const;
    /// J'(z), analytically continued (used for Matsubara residues and quadrature oracles).
    Complex spectral_density(Complex w) const;

    /// Throws ConfigError on gamma <= 0, Omega <= 0 (underdamped), gamma <= Omega (hyp),
    /// negative coupling or non-positive temperature.
    void validate() const;

    bool operator==(const SpectralDensity&) const = default;
};

double reorganization_energy(const SpectralDensity& bath);

struct SystemModel {
    CMatrix h;
    std::vector<SpectralDensity> baths;

    int n_sites() const { return static_cast<int>(h.rows()); }
    /// Throws ConfigError if h is not square Hermitian or baths.size() != n_sites.
    void validate() const;
};

/// Two-site donor/acceptor dimer, energy zero at the acceptor: h = [[delta, h12], [h12, 0]].
SystemModel build_donor_acceptor(double delta, double h12, const SpectralDensity& bath);

/// Named parameter set for the donor/acceptor benchmark; all energies in units of delta.
struct BenchmarkConfig {
    std::string name;
    double delta = 1.0;
    double h12 = 0.4;
    double temperature = 2.0;
    BathFamily family = BathFamily::Underdamped;
    double gamma = 1.0;
    double omega = 0.0;
    double a1p = 0.0;
    double a2p = 0.0;
    int initial_site = 1;

    SpectralDensity bath() const;
    SystemModel model() const { return build_donor_acceptor(delta, h12, bath()); }

    std::string serialize() const;
    static BenchmarkConfig deserialize(const std::string& text);

    bool operator==(const BenchmarkConfig&) const = default;
};

/// All shipped presets (fig1-*, fig2-*, fig3-*).
const std::vector<BenchmarkConfig>& benchmark_presets();
/// Throws ConfigError for an unknown name.
BenchmarkConfig find_preset(const std::string& name);

std::string to_string(BathFamily family);
std::string to_string(Branch branch);
BathFamily bath_family_from_string(const std::string& s);
Branch branch_from_string(const std::string& s);

/// Formats a double so that parsing it back yields the identical value.
std::string format_exact(double x);

}  // namespace ctwa
