#include "ctwa/auxmap.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <unsupported/Eigen/MatrixFunctions>

namespace ctwa {

bool AuxBathMap::has_corrections() const {
    return kappa.size() > 0 && kappa.cwiseAbs().maxCoeff() > 0.0;
}

namespace {

// F coefficients (c_C, c_S) of the oscillator pole pair, recovered from the exponential terms.
std::pair<double, double> oscillator_f_coefficients(const ExponentialKernel& kernel, const SpectralDensity& bath) {
    std::vector<const KernelTerm*> osc;
    for (const auto& term : kernel.terms)
        if (!term.matsubara) osc.push_back(&term);
    const double tol = 1e-12 * std::max(1.0, bath.gamma + bath.omega);
    auto near = [&](Complex a, Complex b) { return std::abs(a - b) <= tol; };

    if (bath.family == BathFamily::Drude) {
        if (osc.size() != 1 || !near(osc[0]->lambda, Complex(-bath.gamma, 0.0)))
            throw NumericalError("unsupported kernel structure for a Drude bath");
        return {osc[0]->alpha_f.real(), 0.0};
    }
    if (osc.size() != 2) throw NumericalError("unsupported kernel structure for an underdamped bath");
    const KernelTerm* plus = osc[0];
    const KernelTerm* minus = osc[1];
    if (bath.branch == Branch::Trig) {
        if (plus->lambda.imag() < minus->lambda.imag()) std::swap(plus, minus);
        if (!near(plus->lambda, Complex(-bath.gamma, bath.omega)) ||
            !near(minus->lambda, Complex(-bath.gamma, -bath.omega)))
            throw NumericalError("kernel exponents do not match the bath (trig branch)");
        return {2.0 * plus->alpha_f.real(), -2.0 * plus->alpha_f.imag()};
    }
    if (plus->lambda.real() < minus->lambda.real()) std::swap(plus, minus);
    if (!near(plus->lambda, Complex(-bath.gamma + bath.omega, 0.0)) ||
        !near(minus->lambda, Complex(-bath.gamma - bath.omega, 0.0)))
        throw NumericalError("kernel exponents do not match the bath (hyp branch)");
    return {(plus->alpha_f + minus->alpha_f).real(), (plus->alpha_f - minus->alpha_f).real()};
}

double checked_sqrt(double b2, double scale, const char* what) {
    if (b2 < 0.0) {
        if (b2 >= -1e-12 * scale) return 0.0;
        throw NumericalError(std::string("noise kernel not realizable: ") + what + " requires b^2 = " +
                             format_exact(b2) + " < 0");
    }
    if (b2 <= 1e-14 * scale) return 0.0;
    return std::sqrt(b2);
}

}  // namespace

AuxBathMap build_map(const ExponentialKernel& kernel, const SpectralDensity& bath) {
    bath.validate();
    int n_mats = 0;
    for (const auto& term : kernel.terms) n_mats += term.matsubara ? 1 : 0;
    const int M = 2 + n_mats;

    AuxBathMap map;
    map.A = Matrix::Zero(M, M);
    map.v = Vector::Zero(M);
    map.eps = Vector::Zero(M);
    map.b = Vector::Zero(M);
    map.blocks.push_back({0, 2});

    const double g = bath.gamma;
    const double w = std::sqrt(bath.shifted_frequency_sq());
    map.A(0, 1) = w;
    map.A(1, 0) = -w;
    map.A(1, 1) = -2.0 * g;

    if (bath.family == BathFamily::Drude) {
        map.eps << 1.0, 1.0;
    } else {
        map.eps(1) = 1.0;
    }

    if (!kernel.empty()) {
        const auto [c_cos, c_sin] = oscillator_f_coefficients(kernel, bath);
        const double scale = std::abs(g * c_cos) + std::abs(bath.omega * c_sin);
        if (bath.family == BathFamily::Drude) {
            map.v(0) = bath.a1();
            map.b(0) = checked_sqrt(2.0 * g * c_cos, scale, "Drude block");
        } else {
            const double W = bath.omega;
            map.v(0) = -bath.a2() * W / w;
            map.b(0) = checked_sqrt(2.0 * (g * c_cos + W * c_sin), scale, "oscillator component 1");
            map.b(1) = checked_sqrt(2.0 * (g * c_cos - W * c_sin), scale, "oscillator component 2");
        }
        int m = 2;
        for (const auto& term : kernel.terms) {
            if (!term.matsubara) continue;
            const double nu = -term.lambda.real();
            const double af = term.alpha_f.real();
            map.A(m, m) = -nu;
            map.eps(m) = 1.0;
            map.b(m) = checked_sqrt(2.0 * nu * af, std::abs(2.0 * nu * af), "Matsubara term");
            map.blocks.push_back({m, 1});
            ++m;
        }
    }

    finalize_map(map);

    std::vector<double> grid(401);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 10.0 / g * static_cast<double>(i) / (grid.size() - 1);
    const MapReport report = verify_map(map, kernel, grid, 1e-8);
    if (!report.ok) throw NumericalError("auxiliary map verification failed: " + report.message);
    return map;
}

void finalize_map(AuxBathMap& map) {
    const int M = map.dim();
    if (map.blocks.empty() && M > 0) map.blocks.push_back({0, M});
    map.b_tilde = Vector::Zero(M);
    map.kappa = Vector::Zero(M);
    for (int m = 0; m < M; ++m) {
        if (map.b(m) < 0.0) throw NumericalError("B must be nonnegative");
        if (map.b(m) == 0.0 && map.v(m) != 0.0)
            throw NumericalError("v_m must vanish where b_m = 0 (component " + std::to_string(m) + ")");
        map.b_tilde(m) = map.v(m) > 0.0 ? -map.b(m) : map.b(m);
        if (map.b(m) > 0.0) map.kappa(m) = std::sqrt(std::abs(map.v(m)) / (2.0 * map.b(m)));
    }
    map.sigma = Matrix::Zero(M, M);
    for (const auto& blk : map.blocks) {
        const Matrix a = map.A.block(blk.offset, blk.offset, blk.size, blk.size);
        const Matrix bb = map.b.segment(blk.offset, blk.size).asDiagonal();
        map.sigma.block(blk.offset, blk.offset, blk.size, blk.size) = stationary_covariance(a, bb);
    }
    map.sigma_factor = Matrix::Zero(M, M);
    if (M > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(map.sigma);
        map.sigma_factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
}

Matrix stationary_covariance(const Matrix& A, const Matrix& B) {
    const Eigen::Index M = A.rows();
    if (A.cols() != M || B.rows() != M) throw NumericalError("stationary_covariance: dimension mismatch");
    if (M == 0) return Matrix(0, 0);
    const Eigen::VectorXcd ev = A.eigenvalues();
    for (Eigen::Index i = 0; i < M; ++i)
        if (!(ev(i).real() < 0.0)) throw NumericalError("A is not Hurwitz (eigenvalue with Re >= 0)");

    const Matrix I = Matrix::Identity(M, M);
    Matrix K(M * M, M * M);
    // vec(A S + S A^T) = (I (x) A + A (x) I) vec(S), column-major vec
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j)
            K.block(i * M, j * M, M, M) = I(i, j) * A + A(i, j) * I;
    const Matrix Q = B * B.transpose();
    const Vector rhs = -Eigen::Map<const Vector>(Q.data(), M * M);
    const Vector s = K.partialPivLu().solve(rhs);
    Matrix sigma = Eigen::Map<const Matrix>(s.data(), M, M);
    return 0.5 * (sigma + sigma.transpose());
}

Vector sample_gaussian(const Matrix& sigma, RandomStream& rng) {
    const Eigen::Index M = sigma.rows();
    if (M == 0) return Vector(0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    const Matrix L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Vector xi(M);
    for (Eigen::Index i = 0; i < M; ++i) xi(i) = rng.normal();
    return L * xi;
}

Vector sample_phi0(const AuxBathMap& map, RandomStream& rng) {
    const int M = map.dim();
    Vector xi(M);
    for (int i = 0; i < M; ++i) xi(i) = rng.normal();
    return map.sigma_factor * xi;
}

Matrix block_exp(const AuxBathMap& map, double t) {
    const int M = map.dim();
    Matrix e = Matrix::Zero(M, M);
    for (const auto& blk : map.blocks) {
        if (blk.size == 1) {
            e(blk.offset, blk.offset) = std::exp(map.A(blk.offset, blk.offset) * t);
        } else {
            const Matrix a = map.A.block(blk.offset, blk.offset, blk.size, blk.size) * t;
            e.block(blk.offset, blk.offset, blk.size, blk.size) = a.exp();
        }
    }
    return e;
}

namespace {

// eps^T e^{A t} x, evaluated block by block.
double project(const AuxBathMap& map, double t, const Vector& x) {
    double s = 0.0;
    for (const auto& blk : map.blocks) {
        if (blk.size == 1) {
            s += map.eps(blk.offset) * std::exp(map.A(blk.offset, blk.offset) * t) * x(blk.offset);
        } else {
            const Matrix e = (map.A.block(blk.offset, blk.offset, blk.size, blk.size) * t).exp();
            s += map.eps.segment(blk.offset, blk.size).dot(e * x.segment(blk.offset, blk.size));
        }
    }
    return s;
}

}  // namespace

Vector noise_response(const AuxBathMap& map, double t) {
    const Vector row = block_exp(map, t).transpose() * map.eps;
    return row.cwiseProduct(map.b);
}

MapReport verify_map(const AuxBathMap& map, const ExponentialKernel& kernel, const std::vector<double>& t_grid,
                     double tol) {
    MapReport r;
    if (map.dim() == 0) {
        if (!kernel.empty()) {
            r.ok = false;
            r.message = "empty map for a non-empty kernel";
        }
        return r;
    }
    for (double t : t_grid) {
        const double d_ref = eval_dissipation(kernel, t);
        const double d_map = project(map, t, map.v);
        r.d_scale = std::max(r.d_scale, std::abs(d_ref));
        const double res = std::abs(d_map - d_ref);
        if (res > r.d_residual) {
            r.d_residual = res;
            r.d_worst_t = t;
        }
    }
    const Vector sigma_eps = map.sigma * map.eps;
    std::map<double, double> f_map_cache;  // grids are usually uniform, so lags repeat
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        for (std::size_t i = j; i < t_grid.size(); ++i) {
            const double tau = t_grid[i] - t_grid[j];
            const double f_ref = eval_noise(kernel, tau);
            auto it = f_map_cache.find(tau);
            if (it == f_map_cache.end()) it = f_map_cache.emplace(tau, project(map, tau, sigma_eps)).first;
            const double f_map = it->second;
            r.f_scale = std::max(r.f_scale, std::abs(f_ref));
            const double res = std::abs(f_map - f_ref);
            if (res > r.f_residual) {
                r.f_residual = res;
                r.f_worst_t = t_grid[i];
                r.f_worst_t_prime = t_grid[j];
            }
        }
    }
    const bool d_ok = r.d_residual <= tol * r.d_scale || (r.d_scale == 0.0 && r.d_residual <= tol);
    const bool f_ok = r.f_residual <= tol * r.f_scale || (r.f_scale == 0.0 && r.f_residual <= tol);
    r.ok = d_ok && f_ok;
    if (!d_ok)
        r.message += "D residual " + format_exact(r.d_residual) + " at t = " + format_exact(r.d_worst_t) + "; ";
    if (!f_ok)
        r.message += "F residual " + format_exact(r.f_residual) + " at (t, t') = (" + format_exact(r.f_worst_t) +
                     ", " + format_exact(r.f_worst_t_prime) + ")";
    return r;
}

}  // namespace ctwa
