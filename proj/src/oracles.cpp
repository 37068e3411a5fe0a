#include "ctwa/oracles.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <map>

namespace ctwa {

CMatrix site_state(int n_sites, int n0) {
    if (n0 < 0 || n0 >= n_sites) throw ConfigError("initial site out of range");
    CMatrix rho = CMatrix::Zero(n_sites, n_sites);
    rho(n0, n0) = 1.0;
    return rho;
}

CMatrix plus_state(int n_sites) { return CMatrix::Constant(n_sites, n_sites, Complex(1.0 / n_sites, 0.0)); }

DensityRecord closed_system(const SystemModel& model, const CMatrix& rho0, const std::vector<double>& t_grid) {
    model.validate();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(model.h);
    const CMatrix& V = es.eigenvectors();
    const CMatrix rho_eig = V.adjoint() * rho0 * V;
    DensityRecord rec;
    for (double t : t_grid) {
        CVector ph(V.rows());
        for (Eigen::Index i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, -es.eigenvalues()(i) * t);
        const CMatrix r = ph.asDiagonal() * rho_eig * ph.conjugate().asDiagonal();
        rec.t.push_back(t);
        rec.rho.push_back(V * r * V.adjoint());
    }
    return rec;
}

Complex lineshape(const ExponentialKernel& kernel, double t) {
    Complex g = 0.0;
    for (const auto& term : kernel.terms) {
        const Complex c = term.alpha_f - Complex(0.0, 1.0) * term.alpha_d;
        const Complex lt = term.lambda * t;
        // (e^{x} - 1 - x) / lambda^2, with a series for small |x|
        Complex e;
        if (std::abs(lt) < 1e-3) {
            e = t * t * (0.5 + lt / 6.0 + lt * lt / 24.0 + lt * lt * lt / 120.0);
        } else {
            e = (std::exp(lt) - 1.0 - lt) / (term.lambda * term.lambda);
        }
        g += c * e;
    }
    return g;
}

DensityRecord pure_dephasing(const SystemModel& model, const std::vector<ExponentialKernel>& kernels,
                             const CMatrix& rho0, const std::vector<double>& t_grid) {
    model.validate();
    const int N = model.n_sites();
    if (static_cast<int>(kernels.size()) != N) throw ConfigError("expected one kernel per site");
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != j && model.h(i, j) != Complex(0.0))
                throw ConfigError("pure dephasing requires h12 = 0 (diagonal h)");
    DensityRecord rec;
    for (double t : t_grid) {
        std::vector<Complex> g(N);
        for (int n = 0; n < N; ++n) g[n] = lineshape(kernels[n], t);
        CMatrix r(N, N);
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < N; ++m) {
                if (n == m) {
                    r(n, m) = rho0(n, m);
                    continue;
                }
                const double dE = model.h(n, n).real() - model.h(m, m).real();
                r(n, m) = rho0(n, m) * std::polar(1.0, -dE * t) * std::exp(-g[n] - std::conj(g[m]));
            }
        rec.t.push_back(t);
        rec.rho.push_back(r);
    }
    return rec;
}

long heom_ado_count(int n_terms, int depth) {
    // C(K + depth, depth)
    long c = 1;
    for (int i = 1; i <= depth; ++i) c = c * (n_terms + i) / i;
    return c;
}

namespace {

struct Mode {
    int site;
    Complex lambda;
    Complex c;      // alpha_F - i alpha_D
    Complex c_bar;  // alpha_F + i alpha_D
};

struct Hierarchy {
    int n_modes = 0;
    int n_ados = 0;
    std::vector<int> index;  // n_ados x n_modes
    std::vector<int> up;     // n_ados x n_modes, -1 if beyond depth
    std::vector<int> down;   // n_ados x n_modes, -1 if component is zero
    std::vector<Complex> decay;
};

Hierarchy build_hierarchy(const std::vector<Mode>& modes, int depth) {
    Hierarchy H;
    H.n_modes = static_cast<int>(modes.size());
    const int K = H.n_modes;
    std::vector<std::vector<int>> list;
    std::map<std::vector<int>, int> rank;
    std::vector<int> cur(K, 0);
    list.push_back(cur);
    rank[cur] = 0;
    // breadth-first by tier so that index order is tier-major
    std::size_t begin = 0;
    for (int tier = 1; tier <= depth && K > 0; ++tier) {
        const std::size_t end = list.size();
        for (std::size_t a = begin; a < end; ++a) {
            for (int k = 0; k < K; ++k) {
                std::vector<int> next = list[a];
                ++next[k];
                if (rank.emplace(next, static_cast<int>(list.size())).second) list.push_back(next);
            }
        }
        begin = end;
    }
    H.n_ados = static_cast<int>(list.size());
    H.index.resize(static_cast<std::size_t>(H.n_ados) * K);
    H.up.assign(static_cast<std::size_t>(H.n_ados) * K, -1);
    H.down.assign(static_cast<std::size_t>(H.n_ados) * K, -1);
    H.decay.resize(H.n_ados);
    for (int a = 0; a < H.n_ados; ++a) {
        Complex d = 0.0;
        for (int k = 0; k < K; ++k) {
            H.index[a * K + k] = list[a][k];
            d += static_cast<double>(list[a][k]) * modes[k].lambda;
            std::vector<int> nb = list[a];
            ++nb[k];
            if (auto it = rank.find(nb); it != rank.end()) H.up[a * K + k] = it->second;
            if (list[a][k] > 0) {
                nb[k] -= 2;
                H.down[a * K + k] = rank.at(nb);
            }
        }
        H.decay[a] = d;
    }
    return H;
}

}  // namespace

HeomResult heom_propagate(const SystemModel& model, const std::vector<ExponentialKernel>& kernels, int depth,
                          double dt, const std::vector<double>& t_grid, const CMatrix& rho0) {
    model.validate();
    const int N = model.n_sites();
    if (static_cast<int>(kernels.size()) != N) throw ConfigError("expected one kernel per site");
    if (depth < 0) throw ConfigError("HEOM depth must be >= 0");
    std::vector<Mode> modes;
    for (int n = 0; n < N; ++n)
        for (const auto& term : kernels[n].terms) {
            if (!(term.lambda.real() < 0.0)) throw NumericalError("kernel exponent with Re >= 0");
            const Complex i(0.0, 1.0);
            modes.push_back({n, term.lambda, term.alpha_f - i * term.alpha_d, term.alpha_f + i * term.alpha_d});
        }
    const Hierarchy H = build_hierarchy(modes, depth);
    const int K = H.n_modes;
    const int NN = N * N;
    const std::size_t size = static_cast<std::size_t>(H.n_ados) * NN;
    const auto steps = grid_steps(t_grid, dt);

    // ADO a, element (i, j) at a * NN + i * N + j
    std::vector<Complex> y(size, 0.0), k1(size), k2(size), k3(size), k4(size), tmp(size);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) y[i * N + j] = rho0(i, j);
    std::vector<Complex> h(NN);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) h[i * N + j] = model.h(i, j);
    const Complex I(0.0, 1.0);

    auto rhs = [&](const std::vector<Complex>& in, std::vector<Complex>& out) {
        for (int a = 0; a < H.n_ados; ++a) {
            const Complex* r = &in[static_cast<std::size_t>(a) * NN];
            Complex* o = &out[static_cast<std::size_t>(a) * NN];
            // -i [h, r] + decay r
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) {
                    Complex s = 0.0;
                    for (int l = 0; l < N; ++l) s += h[i * N + l] * r[l * N + j] - r[i * N + l] * h[l * N + j];
                    o[i * N + j] = -I * s + H.decay[a] * r[i * N + j];
                }
            for (int k = 0; k < K; ++k) {
                const int n = modes[k].site;
                if (const int u = H.up[a * K + k]; u >= 0) {
                    // -i [V_n, r_up]: row n minus column n
                    const Complex* ru = &in[static_cast<std::size_t>(u) * NN];
                    for (int j = 0; j < N; ++j) o[n * N + j] -= I * ru[n * N + j];
                    for (int i = 0; i < N; ++i) o[i * N + n] += I * ru[i * N + n];
                }
                if (const int d = H.down[a * K + k]; d >= 0) {
                    // -i n_k (c V_n r_down - c_bar r_down V_n)
                    const Complex* rd = &in[static_cast<std::size_t>(d) * NN];
                    const double nk = H.index[a * K + k];
                    const Complex fc = -I * nk * modes[k].c;
                    const Complex fb = I * nk * modes[k].c_bar;
                    for (int j = 0; j < N; ++j) o[n * N + j] += fc * rd[n * N + j];
                    for (int i = 0; i < N; ++i) o[i * N + n] += fb * rd[i * N + n];
                }
            }
        }
    };

    HeomResult res;
    res.depth = depth;
    res.n_ados = H.n_ados;
    res.convergence_delta = std::numeric_limits<double>::quiet_NaN();
    auto record = [&](double t) {
        CMatrix r(N, N);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) r(i, j) = y[i * N + j];
        res.max_trace_error = std::max(res.max_trace_error, std::abs(r.trace() - 1.0));
        res.max_hermiticity_error = std::max(res.max_hermiticity_error, (r - r.adjoint()).cwiseAbs().maxCoeff());
        res.record.t.push_back(t);
        res.record.rho.push_back(r);
    };

    long step = 0;
    for (std::size_t g = 0; g < steps.size(); ++g) {
        for (; step < steps[g]; ++step) {
            rhs(y, k1);
            for (std::size_t i = 0; i < size; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
            rhs(tmp, k2);
            for (std::size_t i = 0; i < size; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
            rhs(tmp, k3);
            for (std::size_t i = 0; i < size; ++i) tmp[i] = y[i] + dt * k3[i];
            rhs(tmp, k4);
            for (std::size_t i = 0; i < size; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (!std::isfinite(y[0].real())) throw NumericalError("HEOM integration diverged; reduce dt");
        }
        record(t_grid[g]);
    }
    return res;
}

HeomResult heom_converged(const SystemModel& model, const std::vector<ExponentialKernel>& kernels, double dt,
                          const std::vector<double>& t_grid, const CMatrix& rho0, int start_depth, int max_depth,
                          double tol) {
    HeomResult prev = heom_propagate(model, kernels, start_depth, dt, t_grid, rho0);
    bool any_terms = false;
    for (const auto& k : kernels) any_terms = any_terms || !k.empty();
    if (!any_terms) {
        prev.convergence_delta = 0.0;
        return prev;
    }
    for (int depth = start_depth + 2; depth <= max_depth; depth += 2) {
        HeomResult cur = heom_propagate(model, kernels, depth, dt, t_grid, rho0);
        double delta = 0.0;
        for (std::size_t i = 0; i < cur.record.rho.size(); ++i)
            delta = std::max(delta, std::abs(cur.record.rho[i](0, 0).real() - prev.record.rho[i](0, 0).real()));
        cur.convergence_delta = delta;
        if (delta < tol) return cur;
        prev = std::move(cur);
    }
    throw NumericalError("HEOM not converged at max depth " + std::to_string(max_depth) + " (last |dP1| = " +
                         format_exact(prev.convergence_delta) + ")");
}

}  // namespace ctwa
