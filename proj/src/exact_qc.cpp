#include "ctwa/exact_qc.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ctwa {

namespace {

struct RhoRule {
    std::vector<double> rho;
    std::vector<double> weight;
};

RhoRule make_rule(double rho_max, int panels) {
    using Gauss = boost::math::quadrature::gauss<double, 10>;
    const auto& a = Gauss::abscissa();
    const auto& w = Gauss::weights();
    RhoRule rule;
    const double h = rho_max / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (double s : {-1.0, 1.0}) {
                if (a[i] == 0.0 && s < 0) continue;
                rule.rho.push_back(mid + s * a[i] * 0.5 * h);
                rule.weight.push_back(w[i] * 0.5 * h);
            }
        }
    }
    return rule;
}

// Beyond rho_max the integrand is below e^{-40} of its peak.
double rho_cutoff(double x) { return std::max(4.0, std::sqrt(std::max(0.0, -x) + std::sqrt(80.0))); }

int panels_for(double rho_max, int base_panels) {
    return static_cast<int>(std::ceil(base_panels * rho_max / 4.0));
}

double f_rx_rule(double r, double x, const RhoRule& rule) {
    if (r < 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < rule.rho.size(); ++j) {
        const double p = rule.rho[j];
        const double p2 = p * p;
        s += rule.weight[j] * p * std::exp(-0.5 * (p2 * p2 + 2.0 * p2 * x)) * std::cyl_bessel_j(0.0, p * r);
    }
    return r * s;
}

// Smallest s in [0, L] with  p s + (q - p) s^2 / (2L) = tau  (|f| linear from p to q).
double invert_linear_cell(double p, double q, double L, double tau) {
    const double k = (q - p) / L;
    const double disc = std::max(0.0, p * p + 2.0 * k * tau);
    const double den = p + std::sqrt(disc);
    const double s = den > 0.0 ? 2.0 * tau / den : 0.0;
    return std::clamp(s, 0.0, L);
}

}  // namespace

double f_rx(double r, double x) {
    const double rho_max = rho_cutoff(x);
    return f_rx_rule(r, x, make_rule(rho_max, panels_for(rho_max, 64)));
}

PseudoDensityTable::PseudoDensityTable(const TableParams& params) : params_(params) { build(); }

void PseudoDensityTable::build() {
    const auto& p = params_;
    if (!(p.dx > 0.0) || !(p.dr > 0.0) || !(p.x_max > p.x_min) || !(p.r_max > 0.0) || p.rho_panels < 1)
        throw ConfigError("invalid pseudo-density table parameters");
    n_x_ = static_cast<int>(std::lround((p.x_max - p.x_min) / p.dx)) + 1;
    n_r_ = static_cast<int>(std::lround(p.r_max / p.dr)) + 1;
    if (rho_cutoff(p.x_min) > 4.0) throw ConfigError("table x_min below the fixed rho cutoff range");

    build_rule();
    const Matrix& bessel = *bessel_;
    const auto n_rho = static_cast<Eigen::Index>(rule_rho_.size());
    Matrix damp(n_rho, n_x_);
    for (int k = 0; k < n_x_; ++k) {
        const double x = x_at(k);
        for (Eigen::Index j = 0; j < n_rho; ++j) {
            const double r2 = rule_rho_[j] * rule_rho_[j];
            damp(j, k) = rule_weight_[j] * rule_rho_[j] * std::exp(-0.5 * (r2 * r2 + 2.0 * r2 * x));
        }
    }
    Matrix f = bessel * damp;  // column k = slice x_k
    for (int i = 0; i < n_r_; ++i) f.row(i) *= r_at(i);

    values_.assign(f.data(), f.data() + f.size());
    cumulative_.resize(values_.size());
    for (int k = 0; k < n_x_; ++k)
        accumulate(&values_[static_cast<std::size_t>(k) * n_r_], &cumulative_[static_cast<std::size_t>(k) * n_r_]);
}

void PseudoDensityTable::build_rule() {
    const RhoRule rule = make_rule(4.0, params_.rho_panels);
    rule_rho_ = rule.rho;
    rule_weight_ = rule.weight;
    const auto n_rho = static_cast<Eigen::Index>(rule_rho_.size());
    auto bessel = std::make_shared<Matrix>(n_r_, n_rho);
    for (Eigen::Index j = 0; j < n_rho; ++j)
        for (int i = 0; i < n_r_; ++i) (*bessel)(i, j) = std::cyl_bessel_j(0.0, rule_rho_[j] * r_at(i));
    bessel_ = std::move(bessel);
}

std::vector<double> PseudoDensityTable::slice(double x) const {
    std::vector<double> f(n_r_);
    if (rho_cutoff(x) <= 4.0) {
        const auto n_rho = static_cast<Eigen::Index>(rule_rho_.size());
        Vector damp(n_rho);
        for (Eigen::Index j = 0; j < n_rho; ++j) {
            const double r2 = rule_rho_[j] * rule_rho_[j];
            damp(j) = rule_weight_[j] * rule_rho_[j] * std::exp(-0.5 * (r2 * r2 + 2.0 * r2 * x));
        }
        const Vector col = *bessel_ * damp;
        for (int i = 0; i < n_r_; ++i) f[i] = r_at(i) * col(i);
        return f;
    }
    const double rho_max = rho_cutoff(x);
    const RhoRule rule = make_rule(rho_max, panels_for(rho_max, params_.rho_panels));
    for (int i = 0; i < n_r_; ++i) f[i] = f_rx_rule(r_at(i), x, rule);
    return f;
}

void PseudoDensityTable::accumulate(const double* f, double* cum) const {
    const double h = params_.dr;
    cum[0] = 0.0;
    for (int i = 0; i + 1 < n_r_; ++i) {
        const double a = f[i], b = f[i + 1];
        const double area = (a * b >= 0.0) ? 0.5 * h * (std::abs(a) + std::abs(b))
                                           : 0.5 * h * (a * a + b * b) / (std::abs(a) + std::abs(b));
        cum[i + 1] = cum[i] + area;
    }
}

PseudoDensityTable::Draw PseudoDensityTable::sample_slice(const double* f, const double* cum, int n_r, double dr,
                                                          RandomStream& rng) {
    const double total = cum[n_r - 1];
    const double u = rng.uniform() * total;
    const double* it = std::upper_bound(cum, cum + n_r, u);
    const int i = std::clamp(static_cast<int>(it - cum), 1, n_r - 1);
    const double a = f[i - 1], b = f[i];
    double tau = u - cum[i - 1];
    double s, sign;
    if (a * b >= 0.0) {
        s = invert_linear_cell(std::abs(a), std::abs(b), dr, tau);
        sign = (a + b) >= 0.0 ? 1.0 : -1.0;
    } else {
        const double s0 = dr * std::abs(a) / (std::abs(a) + std::abs(b));
        const double first = 0.5 * std::abs(a) * s0;
        if (tau < first) {
            s = invert_linear_cell(std::abs(a), 0.0, s0, tau);
            sign = a > 0.0 ? 1.0 : -1.0;
        } else {
            tau -= first;
            s = s0 + invert_linear_cell(0.0, std::abs(b), dr - s0, tau);
            sign = b > 0.0 ? 1.0 : -1.0;
        }
    }
    return {(i - 1) * dr + s, sign, total};
}

PseudoDensityTable::Draw PseudoDensityTable::sample(double x, RandomStream& rng) const {
    const double pos = (x - params_.x_min) / params_.dx;
    if (pos >= 0.0 && pos <= n_x_ - 1) {
        const int k = std::min(static_cast<int>(pos), n_x_ - 2);
        const double w = pos - k;
        const int slice = rng.uniform() < w ? k + 1 : k;
        const std::size_t off = static_cast<std::size_t>(slice) * n_r_;
        return sample_slice(&values_[off], &cumulative_[off], n_r_, params_.dr, rng);
    }
    // outside the tabulated range: build the slice on the fly
    const std::vector<double> f = slice(x);
    std::vector<double> cum(n_r_);
    accumulate(f.data(), cum.data());
    rng.uniform();  // keep the draw count independent of the branch
    return sample_slice(f.data(), cum.data(), n_r_, params_.dr, rng);
}

double PseudoDensityTable::interpolate(double r, double x) const {
    if (r < 0.0 || r > r_at(n_r_ - 1)) return 0.0;
    const double pos = (x - params_.x_min) / params_.dx;
    const double rp = r / params_.dr;
    const int i = std::min(static_cast<int>(rp), n_r_ - 2);
    const double wr = rp - i;
    auto slice_at = [&](int k) { return (1.0 - wr) * value(k, i) + wr * value(k, i + 1); };
    if (pos < 0.0 || pos > n_x_ - 1) return f_rx(r, x);
    const int k = std::min(static_cast<int>(pos), n_x_ - 2);
    const double wx = pos - k;
    return (1.0 - wx) * slice_at(k) + wx * slice_at(k + 1);
}

namespace {

constexpr char kMagic[8] = {'C', 'T', 'W', 'A', 'F', 'R', 'X', '1'};

}  // namespace

void PseudoDensityTable::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write table cache '" + path + "'");
    os.write(kMagic, sizeof(kMagic));
    const double hdr[5] = {params_.x_min, params_.x_max, params_.dx, params_.r_max, params_.dr};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    const std::int32_t ints[3] = {params_.rho_panels, n_x_, n_r_};
    os.write(reinterpret_cast<const char*>(ints), sizeof(ints));
    os.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(values_.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(cumulative_.data()),
             static_cast<std::streamsize>(cumulative_.size() * sizeof(double)));
    if (!os) throw IoError("failed writing table cache '" + path + "'");
}

PseudoDensityTable PseudoDensityTable::load_or_build(const TableParams& params, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (is) {
        char magic[8];
        double hdr[5];
        std::int32_t ints[3];
        is.read(magic, sizeof(magic));
        is.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
        is.read(reinterpret_cast<char*>(ints), sizeof(ints));
        const TableParams stored{hdr[0], hdr[1], hdr[2], hdr[3], hdr[4], ints[0]};
        if (is && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0 && stored == params) {
            PseudoDensityTable t{Uninitialized{}};
            t.params_ = params;
            t.n_x_ = ints[1];
            t.n_r_ = ints[2];
            const std::size_t n = static_cast<std::size_t>(t.n_x_) * t.n_r_;
            t.values_.resize(n);
            t.cumulative_.resize(n);
            is.read(reinterpret_cast<char*>(t.values_.data()), static_cast<std::streamsize>(n * sizeof(double)));
            is.read(reinterpret_cast<char*>(t.cumulative_.data()), static_cast<std::streamsize>(n * sizeof(double)));
            if (is) {
                t.build_rule();
                return t;
            }
        }
    }
    PseudoDensityTable t(params);
    t.save(path);
    return t;
}

MomentsReport moments_check(const PseudoDensityTable& table, double dt, const std::vector<double>& xs, double tol) {
    MomentsReport rep;
    const double h = table.params().dr;
    // 3-point Gauss-Legendre per cell integrates (linear f) * r^4 exactly
    const double g[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    for (double x : xs) {
        MomentRow row{};
        row.x = x;
        double m0 = 0.0, m2 = 0.0, m4 = 0.0, mabs = 0.0, m1 = 0.0;
        for (int i = 0; i + 1 < table.n_r(); ++i) {
            const double ra = table.r_at(i);
            const double fa = table.interpolate(ra, x);
            const double fb = table.interpolate(ra + h, x);
            for (int q = 0; q < 3; ++q) {
                const double s = 0.5 * h * (1.0 + g[q]);
                const double r = ra + s;
                const double f = fa + (fb - fa) * s / h;
                const double w = 0.5 * h * gw[q];
                m0 += w * f;
                m1 += w * f * r;
                m2 += w * f * r * r;
                m4 += w * f * r * r * r * r;
                mabs += w * std::abs(f);
            }
        }
        const double q4 = std::pow(dt, 0.25);
        row.zeroth = m0;
        row.second = std::sqrt(dt) * m2 / 4.0;
        row.second_expected = std::sqrt(dt) * x;
        row.fourth = dt * m4 / 16.0;
        row.fourth_expected = 2.0 * dt * (x * x - 1.0);
        // theta average of e^{i theta} on a uniform rule
        Complex phase = 0.0;
        const int n_theta = 64;
        for (int j = 0; j < n_theta; ++j) phase += std::polar(1.0, 2.0 * kPi * j / n_theta) / double(n_theta);
        row.mean_chi = std::abs(phase) * q4 * m1 / 2.0;
        row.norm = mabs;
        const double res = std::max({std::abs(row.zeroth - 1.0), std::abs(row.second - row.second_expected),
                                     std::abs(row.fourth - row.fourth_expected), row.mean_chi});
        rep.max_residual = std::max(rep.max_residual, res);
        rep.rows.push_back(row);
    }
    rep.min_norm = std::numeric_limits<double>::infinity();
    for (int k = 0; k < table.n_x(); ++k) rep.min_norm = std::min(rep.min_norm, table.norm(k));
    rep.ok = rep.max_residual <= tol && rep.min_norm >= 1.0 - 1e-12;
    return rep;
}

void exact_step(WeightedTrajectory& traj, Stepper& stepper, const PseudoDensityTable& table, RandomStream& rng) {
    const auto& maps = stepper.maps();
    const double dt = stepper.dt();
    stepper.effective_hamiltonian(traj.phi);
    const CMatrix& u = stepper.linear_propagator();
    Vector occ2(traj.psi.size());
    for (Eigen::Index n = 0; n < traj.psi.size(); ++n) occ2(n) = 2.0 * std::norm(traj.psi(n));
    const auto& dw = stepper.draw_increments(rng);
    stepper.update_phi(traj.phi, occ2, true);
    CVector psi = u * traj.psi;

    const double inv_sqrt_dt = 1.0 / std::sqrt(dt);
    const double q4 = std::pow(dt, 0.25);
    for (std::size_t n = 0; n < maps.size(); ++n) {
        const auto& k = maps[n].kappa;
        for (Eigen::Index m = 0; m < k.size(); ++m) {
            if (!(k(m) > 0.0)) continue;
            const double x = dw[n](m) * inv_sqrt_dt;
            const auto draw = table.sample(x, rng);
            const double theta = 2.0 * kPi * rng.uniform();
            psi(static_cast<Eigen::Index>(n)) += k(m) * 0.5 * q4 * std::polar(draw.r, theta);
            traj.log_weight += std::log(draw.norm);
            traj.sign_product *= draw.sign;
        }
    }
    traj.psi = std::move(psi);
    traj.t += dt;
}

TrajectoryRecord run_exact(Stepper& stepper, const PseudoDensityTable& table, const WignerSample& sample,
                           const std::vector<long>& record_steps, RandomStream& rng) {
    TrajectoryRecord rec;
    WeightedTrajectory traj{sample.psi0, initial_phi(stepper.maps(), rng), 0.0, 1.0, 0.0};
    long step = 0;
    for (long target : record_steps) {
        for (; step < target; ++step) {
            exact_step(traj, stepper, table, rng);
            if (traj.log_weight > kLogWeightLimit)
                throw NumericalError("exact-scheme weight overflow: log weight " + format_exact(traj.log_weight) +
                                     " > " + format_exact(kLogWeightLimit) + " at t = " + format_exact(traj.t));
        }
        const double w = sample.sign * sample.norm * traj.sign_product * std::exp(traj.log_weight);
        rec.obs.push_back(w * weyl_matrix(traj.psi));
        rec.weight.push_back(w);
        rec.sign.push_back(sample.sign * traj.sign_product);
    }
    rec.log_weight = traj.log_weight;
    return rec;
}

}  // namespace ctwa
