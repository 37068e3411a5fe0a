#include "ctwa/wigner.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

namespace ctwa {

namespace {

// radial density on site n0 before normalization: 4 r e^{-2 r^2} |4 r^2 - 1|
double radial_weight(double r) { return 4.0 * r * std::exp(-2.0 * r * r) * std::abs(4.0 * r * r - 1.0); }

}  // namespace

double localized_wigner_norm() {
    auto f = [](double u) { return std::exp(-u) * std::abs(2.0 * u - 1.0); };
    using boost::math::quadrature::gauss_kronrod;
    boost::math::quadrature::exp_sinh<double> tail;
    return gauss_kronrod<double, 31>::integrate(f, 0.0, 0.5, 10, 1e-15) +
           tail.integrate(f, 0.5, std::numeric_limits<double>::infinity());
}

LocalizedSampler::LocalizedSampler(int n_sites, int n0) : n_sites_(n_sites), n0_(n0) {
    if (n_sites < 1) throw ConfigError("number of sites must be >= 1");
    if (n0 < 0 || n0 >= n_sites) throw ConfigError("initial site out of range");
    norm_ = localized_wigner_norm();

    r_grid_.resize(kRadialPoints);
    cdf_.resize(kRadialPoints);
    const double dr = kRadialMax / (kRadialPoints - 1);
    const double kink = 0.5;  // |4r^2 - 1| is not smooth at r = 1/2
    cdf_[0] = 0.0;
    r_grid_[0] = 0.0;
    using boost::math::quadrature::gauss_kronrod;
    for (int i = 1; i < kRadialPoints; ++i) {
        r_grid_[i] = dr * i;
        const double a = r_grid_[i - 1], b = r_grid_[i];
        double piece;
        if (a < kink && kink < b)
            piece = gauss_kronrod<double, 15>::integrate(radial_weight, a, kink, 0) +
                    gauss_kronrod<double, 15>::integrate(radial_weight, kink, b, 0);
        else
            piece = gauss_kronrod<double, 15>::integrate(radial_weight, a, b, 0);
        cdf_[i] = cdf_[i - 1] + piece;
    }
    const double total = cdf_.back();
    for (double& c : cdf_) c /= total;
}

double LocalizedSampler::radial_cdf(double r) const {
    if (r <= 0.0) return 0.0;
    if (r >= kRadialMax) return 1.0;
    const double pos = r / kRadialMax * (kRadialPoints - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - i;
    return (1.0 - w) * cdf_[i] + w * cdf_[i + 1];
}

WignerSample LocalizedSampler::sample(RandomStream& rng) const {
    WignerSample s;
    s.psi0.resize(n_sites_);
    s.norm = norm_;
    for (int n = 0; n < n_sites_; ++n) {
        if (n == n0_) {
            const double u = rng.uniform();
            const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
            const std::size_t i = std::clamp<std::size_t>(it - cdf_.begin(), 1, cdf_.size() - 1);
            const double c0 = cdf_[i - 1], c1 = cdf_[i];
            const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
            const double r = r_grid_[i - 1] + w * (r_grid_[i] - r_grid_[i - 1]);
            const double theta = 2.0 * kPi * rng.uniform();
            s.psi0(n) = std::polar(r, theta);
            s.sign = 4.0 * r * r - 1.0 >= 0.0 ? 1.0 : -1.0;
        } else {
            const double re = 0.5 * rng.normal();
            const double im = 0.5 * rng.normal();
            s.psi0(n) = Complex(re, im);
        }
    }
    return s;
}

CMatrix weyl_matrix(const CVector& psi) {
    CMatrix m = psi * psi.adjoint();
    m.diagonal().array() -= 0.5;
    return m;
}

}  // namespace ctwa
