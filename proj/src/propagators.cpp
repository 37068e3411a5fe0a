#include "ctwa/propagators.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ctwa {

void hermitian_propagator(const CMatrix& h, double dt, CMatrix& out) {
    const Eigen::Index n = h.rows();
    out.resize(n, n);
    if (n == 2) {
        // h = a 1 + b.sigma  ->  e^{-i h dt} = e^{-i a dt} [cos(|b| dt) 1 - i sin(|b| dt) (b.sigma)/|b|]
        const double a = 0.5 * (h(0, 0).real() + h(1, 1).real());
        const double bz = 0.5 * (h(0, 0).real() - h(1, 1).real());
        const Complex off = h(0, 1);
        const double bn = std::sqrt(bz * bz + std::norm(off));
        const Complex phase = std::polar(1.0, -a * dt);
        const double c = std::cos(bn * dt);
        const double sinc = bn > 0.0 ? std::sin(bn * dt) / bn : dt;
        const Complex mi(0.0, -1.0);
        out(0, 0) = phase * (c + mi * sinc * bz);
        out(1, 1) = phase * (c - mi * sinc * bz);
        out(0, 1) = phase * mi * sinc * off;
        out(1, 0) = phase * mi * sinc * std::conj(off);
        return;
    }
    if (n == 1) {
        out(0, 0) = std::polar(1.0, -h(0, 0).real() * dt);
        return;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    CVector ph(n);
    for (Eigen::Index i = 0; i < n; ++i) ph(i) = std::polar(1.0, -es.eigenvalues()(i) * dt);
    out.noalias() = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

Stepper::Stepper(const CMatrix& h, const std::vector<AuxBathMap>& maps, double dt, LinearStep linear)
    : h_(h), maps_(maps), dt_(dt), sqrt_dt_(std::sqrt(dt)), linear_(linear) {
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (h.rows() != h.cols() || static_cast<Eigen::Index>(maps.size()) != h.rows())
        throw ConfigError("expected a square h and one auxiliary map per site");
    const auto N = h.rows();
    h_eff_ = h_;
    u_.resize(N, N);
    tmp_.resize(N, N);
    psi_tmp_.resize(N);
    occ_.resize(N);
    dw_.resize(maps_.size());
    int max_dim = 0;
    for (std::size_t n = 0; n < maps_.size(); ++n) {
        dw_[n] = Vector::Zero(maps_[n].dim());
        max_dim = std::max(max_dim, maps_[n].dim());
    }
    scratch_.resize(max_dim);
}

const CMatrix& Stepper::effective_hamiltonian(const std::vector<Vector>& phi) {
    h_eff_ = h_;
    for (std::size_t n = 0; n < maps_.size(); ++n)
        if (maps_[n].dim() > 0) h_eff_(n, n) -= maps_[n].eps.dot(phi[n]);
    return h_eff_;
}

const CMatrix& Stepper::linear_propagator() {
    if (linear_ == LinearStep::Exponential) {
        hermitian_propagator(h_eff_, dt_, u_);
    } else {
        u_ = CMatrix::Identity(h_eff_.rows(), h_eff_.cols());
        u_ -= Complex(0.0, dt_) * h_eff_;
    }
    return u_;
}

const std::vector<Vector>& Stepper::draw_increments(RandomStream& rng) {
    for (std::size_t n = 0; n < maps_.size(); ++n) {
        const auto& b = maps_[n].b;
        for (Eigen::Index m = 0; m < b.size(); ++m) dw_[n](m) = b(m) > 0.0 ? sqrt_dt_ * rng.normal() : 0.0;
    }
    return dw_;
}

void Stepper::update_phi(std::vector<Vector>& phi, const Vector& occ2, bool tilde) const {
    for (std::size_t n = 0; n < maps_.size(); ++n) {
        const auto& map = maps_[n];
        const int M = map.dim();
        if (M == 0) continue;
        auto drift = scratch_.head(M);
        drift.noalias() = map.A * phi[n];
        drift += occ2(n) * map.v;
        const Vector& c = tilde ? map.b_tilde : map.b;
        phi[n] += dt_ * drift + c.cwiseProduct(dw_[n]);
    }
}

void Stepper::twa_step(TwaState& s, RandomStream& rng) {
    effective_hamiltonian(s.phi);
    linear_propagator();
    for (Eigen::Index n = 0; n < s.psi.size(); ++n) occ_(n) = 2.0 * std::norm(s.psi(n));
    draw_increments(rng);
    update_phi(s.phi, occ_, false);
    psi_tmp_.noalias() = u_ * s.psi;
    s.psi.swap(psi_tmp_);
    s.t += dt_;
}

double Stepper::ctwa_step(CtwaState& s, RandomStream& rng) {
    effective_hamiltonian(s.phi);
    linear_propagator();
    for (Eigen::Index n = 0; n < s.R.rows(); ++n) occ_(n) = 2.0 * s.R(n, n).real();
    draw_increments(rng);
    update_phi(s.phi, occ_, true);
    tmp_.noalias() = u_ * s.R;
    s.R.noalias() = tmp_ * u_.adjoint();
    // exact Hermiticity: average with the adjoint, real diagonal
    for (Eigen::Index i = 0; i < s.R.rows(); ++i) {
        s.R(i, i) = s.R(i, i).real();
        for (Eigen::Index j = i + 1; j < s.R.cols(); ++j) {
            const Complex a = 0.5 * (s.R(i, j) + std::conj(s.R(j, i)));
            s.R(i, j) = a;
            s.R(j, i) = std::conj(a);
        }
    }
    double increment = 0.0;
    for (std::size_t n = 0; n < maps_.size(); ++n) {
        const auto& k = maps_[n].kappa;
        double kick = 0.0;
        for (Eigen::Index m = 0; m < k.size(); ++m)
            if (k(m) > 0.0) kick += k(m) * k(m) * dw_[n](m);
        if (kick != 0.0) s.R(n, n) += kick;
        increment += kick;
    }
    s.t += dt_;
    return increment;
}

void twa_step(TwaState& s, const std::vector<AuxBathMap>& maps, const CMatrix& h, double dt, RandomStream& rng,
              LinearStep linear) {
    Stepper st(h, maps, dt, linear);
    st.twa_step(s, rng);
}

double ctwa_step(CtwaState& s, const std::vector<AuxBathMap>& maps, const CMatrix& h, double dt, RandomStream& rng,
                 LinearStep linear) {
    Stepper st(h, maps, dt, linear);
    return st.ctwa_step(s, rng);
}

std::vector<Vector> initial_phi(const std::vector<AuxBathMap>& maps, RandomStream& rng) {
    std::vector<Vector> phi;
    phi.reserve(maps.size());
    for (const auto& map : maps) phi.push_back(sample_phi0(map, rng));
    return phi;
}

TrajectoryRecord run_trajectory(Method method, Stepper& stepper, const WignerSample& sample,
                                const std::vector<long>& record_steps, RandomStream& rng) {
    if (method == Method::Exact) throw ConfigError("run_trajectory handles twa/ctwa; use run_exact");
    TrajectoryRecord rec;
    rec.obs.reserve(record_steps.size());
    const double w = sample.sign * sample.norm;
    rec.weight.assign(record_steps.size(), w);
    rec.sign.assign(record_steps.size(), sample.sign);

    auto phi = initial_phi(stepper.maps(), rng);
    long step = 0;
    if (method == Method::Twa) {
        TwaState s{sample.psi0, std::move(phi), 0.0};
        for (long target : record_steps) {
            for (; step < target; ++step) stepper.twa_step(s, rng);
            rec.obs.push_back(w * weyl_matrix(s.psi));
        }
    } else {
        CtwaState s{sample.psi0 * sample.psi0.adjoint(), std::move(phi), 0.0};
        for (long target : record_steps) {
            for (; step < target; ++step) stepper.ctwa_step(s, rng);
            CMatrix o = s.R;
            o.diagonal().array() -= 0.5;
            rec.obs.push_back(w * o);
        }
    }
    return rec;
}

TrajectoryRecord run_trajectory(Method method, const SystemModel& model, const std::vector<AuxBathMap>& maps,
                                const WignerSample& sample, double dt, const std::vector<double>& t_grid,
                                RandomStream& rng, LinearStep linear) {
    Stepper stepper(model, maps, dt, linear);
    return run_trajectory(method, stepper, sample, grid_steps(t_grid, dt), rng);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Twa: return "twa";
        case Method::Ctwa: return "ctwa";
        case Method::Exact: return "exact";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "twa") return Method::Twa;
    if (s == "ctwa") return Method::Ctwa;
    if (s == "exact") return Method::Exact;
    throw ConfigError("unknown stochastic method '" + s + "'");
}

}  // namespace ctwa
