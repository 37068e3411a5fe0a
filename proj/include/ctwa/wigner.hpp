#pragma once

#include <vector>

#include "ctwa/rng.hpp"
#include "ctwa/types.hpp"

namespace ctwa {

/// One draw from |rho_W| / N(rho_W) with its sign.
struct WignerSample {
    CVector psi0;
    double sign = 1.0;
    double norm = 1.0;  ///< N(rho_W), identical for all samples of a state
};

/// N(rho^1_W) = int e^{-u} |2u - 1| du, by adaptive quadrature.
double localized_wigner_norm();

/// Sampler for the Wigner function of one exciton localized on site n0 (0-based):
///   rho_W = (2/pi)^N e^{-2|psi|^2} (4|psi_{n0}|^2 - 1).
class LocalizedSampler {
  public:
    static constexpr int kRadialPoints = 4096;
    static constexpr double kRadialMax = 4.0;

    LocalizedSampler(int n_sites, int n0);

    WignerSample sample(RandomStream& rng) const;

    int n_sites() const { return n_sites_; }
    int site() const { return n0_; }
    double norm() const { return norm_; }
    /// Tabulated CDF of the radius on site n0 (piecewise linear between grid points).
    double radial_cdf(double r) const;

  private:
    int n_sites_;
    int n0_;
    double norm_;
    std::vector<double> r_grid_;
    std::vector<double> cdf_;
};

inline WignerSample sample_localized(int n0, int n_sites, RandomStream& rng) {
    return LocalizedSampler(n_sites, n0).sample(rng);
}

/// Weyl symbol of a^dagger_{n'} a_n: psi_n psi*_{n'} - delta_{nn'}/2.
inline Complex weyl_number(const CVector& psi, int n, int n_prime) {
    return psi(n) * std::conj(psi(n_prime)) - (n == n_prime ? 0.5 : 0.0);
}

/// Full Weyl matrix psi psi^dagger - 1/2.
CMatrix weyl_matrix(const CVector& psi);

}  // namespace ctwa
