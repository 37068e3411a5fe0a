// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "ctwa/run.hpp"

using namespace ctwa;

namespace {

int g_failures = 0;

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

void report(int id, const std::string& title, bool pass, const std::string& detail) {
    std::printf("%s  [%2d] %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

// Runs `body`; an exception counts as failure of the criterion.
void criterion(int id, const std::string& title, const std::function<std::pair<bool, std::string>()>& body) {
    const auto start = std::chrono::steady_clock::now();
    std::pair<bool, std::string> r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(id, title, r.first, r.second + fmt(" (%.1f s)", secs));
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<AuxBathMap> maps_for(const SystemModel& m) {
    std::vector<AuxBathMap> out;
    for (const auto& b : m.baths) out.push_back(build_map(decompose(b), b));
    return out;
}

std::vector<ExponentialKernel> kernels_for(const SystemModel& m) {
    std::vector<ExponentialKernel> out;
    for (const auto& b : m.baths) out.push_back(decompose(b));
    return out;
}

EnsembleResult ensemble(Method method, const SystemModel& m, long n, double dt, const std::vector<double>& grid,
                        std::uint64_t seed, const PseudoDensityTable* table = nullptr) {
    EnsembleOptions o;
    o.n_traj = n;
    o.dt = dt;
    o.t_grid = grid;
    o.seed = seed;
    o.workers = workers();
    o.table = table;
    return run_ensemble(method, m, maps_for(m), o);
}

double p1(const EnsembleResult& r, std::size_t i) { return r.points[i].mean(0, 0).real(); }
double p1_se(const EnsembleResult& r, std::size_t i) { return r.points[i].se(0, 0); }

std::vector<double> grid_step(double t_max, double step) {
    return uniform_grid(t_max, static_cast<int>(std::lround(t_max / step)) + 1);
}

// Closed form of the stationary covariance of the oscillator block, valid for b2 = 0.
Matrix closed_form_sigma(const AuxBathMap& map, const SpectralDensity& bath) {
    const double g = bath.gamma, w2 = bath.shifted_frequency_sq();
    const double b1 = map.b(0) * map.b(0);
    Matrix s(2, 2);
    s(0, 0) = b1 / (4 * g) + b1 * g / w2;
    s(0, 1) = s(1, 0) = -b1 / (2 * std::sqrt(w2));
    s(1, 1) = b1 / (4 * g);
    return s;
}

}  // namespace

int main() {
    std::printf("acceptance suite, %d worker(s)\n", workers());
    const SystemModel fig2 = find_preset("fig2-g1-O01").model();

    criterion(1, "kernel/map consistency", [] {
        const auto start = std::chrono::steady_clock::now();
        double worst_d = 0.0, worst_f = 0.0;
        int n = 0;
        bool ok = true;
        for (const auto& p : benchmark_presets()) {
            if (p.name.rfind("fig1", 0) != 0 && p.name.rfind("fig2", 0) != 0) continue;
            const auto bath = p.bath();
            const auto kernel = decompose(bath);
            const auto map = build_map(kernel, bath);
            const auto rep = verify_map(map, kernel, uniform_grid(10.0 / bath.gamma, 401), 1e-8);
            ok = ok && rep.ok;
            worst_d = std::max(worst_d, rep.d_residual / rep.d_scale);
            worst_f = std::max(worst_f, rep.f_residual / rep.f_scale);
            ++n;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ok = ok && worst_d <= 1e-8 && worst_f <= 1e-8 && secs < 1.0;
        return std::pair{ok, fmt("%d presets, max rel D residual %.2e, max rel F residual %.2e, %.3f s", n, worst_d,
                                 worst_f, secs)};
    });

    criterion(2, "stationary covariance", [&] {
        double worst = 0.0;
        for (const auto& p : benchmark_presets()) {
            if (p.name.rfind("fig1", 0) != 0 && p.name.rfind("fig2", 0) != 0) continue;
            const auto bath = p.bath();
            const auto map = build_map(decompose(bath), bath);
            if (map.dim() < 2 || map.b(1) != 0.0)
                return std::pair{false, p.name + ": map is not a b2 = 0 oscillator block"};
            const Matrix ref = closed_form_sigma(map, bath);
            worst = std::max(worst, (map.sigma - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
        }
        // free evolution d phi = A phi dt + B dW from phi(0) ~ N(0, Sigma) up to t = 20 / gamma
        double worst_cov = 0.0;
        for (const char* name : {"fig2-g1-O01", "fig1-g1"}) {
            const auto m = find_preset(name).model();
            const auto maps = maps_for(m);
            const double gamma = m.baths[0].gamma;
            const double dt = 0.01 / gamma;
            const long steps = std::lround(20.0 / gamma / dt);
            Stepper st(m, maps, dt);
            const Vector zero = Vector::Zero(m.n_sites());
            const int M = maps[0].dim();
            Matrix s2 = Matrix::Zero(M, M);
            const long n = 100000;
            for (long k = 0; k < n; ++k) {
                RandomStream rng = RandomStream::for_trajectory(2024, k);
                auto phi = initial_phi(maps, rng);
                for (long i = 0; i < steps; ++i) {
                    st.draw_increments(rng);
                    st.update_phi(phi, zero, false);
                }
                s2 += phi[0] * phi[0].transpose();
            }
            const Matrix cov = s2 / double(n);
            worst_cov = std::max(worst_cov, (cov - maps[0].sigma).cwiseAbs().maxCoeff() /
                                                maps[0].sigma.cwiseAbs().maxCoeff());
        }
        return std::pair{worst <= 1e-10 && worst_cov <= 0.05,
                         fmt("Lyapunov vs closed form %.2e rel; ensemble covariance at t = 20/gamma within %.2f%%",
                             worst, 100 * worst_cov)};
    });

    criterion(3, "Wigner sampling", [&] {
        const double norm_err = std::abs(localized_wigner_norm() - (4 * std::exp(-0.5) - 1));
        const auto r = ensemble(Method::Twa, fig2, 100000, 0.01, {0.0}, 3);
        const auto& p = r.points[0];
        double worst_z = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                const double target = (i == 0 && j == 0) ? 1.0 : 0.0;
                worst_z = std::max(worst_z, std::abs(p.mean(i, j) - target) / p.se(i, j));
            }
        return std::pair{norm_err <= 1e-6 && worst_z <= 3.0,
                         fmt("|N - (4e^-1/2 - 1)| = %.1e; rho(0) max deviation %.2f SE (1e5 samples)", norm_err,
                             worst_z)};
    });

    criterion(4, "closed-system limit", [] {
        const auto m = build_donor_acceptor(1.0, 0.4, SpectralDensity::underdamped(0.0, 1.0, 0.1, 2.0));
        const double w = std::sqrt(1.0 + 4 * 0.16);
        auto rabi = [&](double t) { return 1.0 - 0.64 / (w * w) * std::pow(std::sin(0.5 * w * t), 2); };
        const double rabi_min = rabi(kPi / w);
        const auto grid = grid_step(5.0, 0.25);
        double worst = 0.0;
        for (Method method : {Method::Twa, Method::Ctwa}) {
            const auto r = ensemble(method, m, 100000, 0.01, grid, 4);
            for (std::size_t i = 0; i < grid.size(); ++i)
                worst = std::max(worst, std::abs(p1(r, i) - rabi(grid[i])) / p1_se(r, i));
        }
        // kappa = 0: TWA and CTWA trajectories coincide under shared seeds
        const auto maps = maps_for(m);
        Stepper st(m, maps, 0.01);
        LocalizedSampler sampler(2, 0);
        double traj_diff = 0.0;
        for (long k = 0; k < 200; ++k) {
            RandomStream a = RandomStream::for_trajectory(5, k), b = RandomStream::for_trajectory(5, k);
            const auto ra = run_trajectory(Method::Twa, st, sampler.sample(a), {0, 100, 500}, a);
            const auto rb = run_trajectory(Method::Ctwa, st, sampler.sample(b), {0, 100, 500}, b);
            for (std::size_t i = 0; i < ra.obs.size(); ++i)
                traj_diff = std::max(traj_diff, (ra.obs[i] - rb.obs[i]).cwiseAbs().maxCoeff());
        }
        return std::pair{worst <= 3.0 && std::abs(rabi_min - 0.60976) < 5e-6 && traj_diff < 1e-12,
                         fmt("Rabi minimum %.5f; TWA/CTWA max deviation %.2f SE (1e5 traj); trajectory diff %.1e",
                             rabi_min, worst, traj_diff)};
    });

    criterion(5, "pseudo-density identities", [] {
        const PseudoDensityTable table;
        double worst = 0.0;
        bool ok = true;
        for (double dt : {1.0, 1e-3}) {
            const auto rep = moments_check(table, dt, {-1, 0, 1, 2}, 1e-4);
            ok = ok && rep.ok;
            worst = std::max(worst, rep.max_residual);
        }
        const double min_norm = moments_check(table, 1.0).min_norm;
        return std::pair{ok && min_norm >= 1.0,
                         fmt("max moment residual %.2e; min N(f,x) over %d slices = %.6f", worst, table.n_x(),
                             min_norm)};
    });

    criterion(6, "CTWA trace identity", [&] {
        const auto maps = maps_for(fig2);
        Stepper st(fig2, maps, 1e-3);
        double worst = 0.0;
        for (long k = 0; k < 200; ++k) {
            RandomStream rng = RandomStream::for_trajectory(6, k);
            CtwaState s{CMatrix::Zero(2, 2), initial_phi(maps, rng), 0.0};
            const auto ws = LocalizedSampler(2, 0).sample(rng);
            s.R = ws.psi0 * ws.psi0.adjoint();
            for (int i = 0; i < 1000; ++i) {
                const double before = s.R.trace().real();
                st.ctwa_step(s, rng);
                double expected = 0.0;
                for (std::size_t n = 0; n < maps.size(); ++n)
                    for (int c = 0; c < maps[n].dim(); ++c)
                        expected += maps[n].kappa(c) * maps[n].kappa(c) * st.increments()[n](c);
                worst = std::max(worst, std::abs(s.R.trace().real() - before - expected) / std::max(1.0, before));
            }
        }
        // ensemble mean of w tr R = w tr(R - 1/2) + w N/2
        Stepper coarse(fig2, maps, 0.01);
        const std::vector<long> steps = {0, 100, 500, 2000};
        LocalizedSampler sampler(2, 0);
        std::vector<double> s1(steps.size()), s2(steps.size());
        const long n = 20000;
        for (long k = 0; k < n; ++k) {
            RandomStream rng = RandomStream::for_trajectory(61, k);
            const auto ws = sampler.sample(rng);
            const auto rec = run_trajectory(Method::Ctwa, coarse, ws, steps, rng);
            for (std::size_t i = 0; i < steps.size(); ++i) {
                const double tr = rec.obs[i].trace().real() + rec.weight[i];
                s1[i] += tr;
                s2[i] += tr * tr;
            }
        }
        double worst_z = 0.0;
        std::string means;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const double mean = s1[i] / n;
            const double se = std::sqrt((s2[i] / n - mean * mean) / (n - 1));
            worst_z = std::max(worst_z, std::abs(mean - 2.0) / se);
            means += fmt("%s%.3f", i ? "," : "", mean);
        }
        return std::pair{worst < 1e-14 && worst_z <= 3.0,
                         fmt("max per-step |d tr R - sum kappa^2 dW| = %.1e; mean tr R at t=0,1,5,20: %s (target 2, "
                             "max %.2f SE)",
                             worst, means.c_str(), worst_z)};
    });

    criterion(7, "short-time agreement with HEOM", [&] {
        const auto grid = grid_step(1.0, 0.1);
        const auto heom = heom_converged(fig2, kernels_for(fig2), 1e-3, grid, site_state(2, 0));
        const auto twa = ensemble(Method::Twa, fig2, 100000, 1e-3, grid, 7);
        const auto ctwa = ensemble(Method::Ctwa, fig2, 100000, 1e-3, grid, 7);
        bool ok = true;
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double h = heom.record.rho[i](0, 0).real();
            const double dt_ = std::abs(p1(twa, i) - h), dc = std::abs(p1(ctwa, i) - h);
            const double dtc = std::abs(p1(twa, i) - p1(ctwa, i));
            ok = ok && dt_ <= std::max(3 * p1_se(twa, i), 0.01) && dc <= std::max(3 * p1_se(ctwa, i), 0.01) &&
                 dtc <= std::max(3 * std::hypot(p1_se(twa, i), p1_se(ctwa, i)), 0.01);
            worst = std::max({worst, dt_, dc});
        }
        const std::size_t last = grid.size() - 1;
        return std::pair{ok, fmt("P1(1): TWA %.4f +- %.4f, CTWA %.4f +- %.4f, HEOM %.4f (depth %d); max |dP1| %.4f",
                                 p1(twa, last), p1_se(twa, last), p1(ctwa, last), p1_se(ctwa, last),
                                 heom.record.rho[last](0, 0).real(), heom.depth, worst)};
    });

    criterion(8, "long-time ordering CTWA vs TWA", [] {
        bool ok = true;
        std::string detail;
        for (const char* name : {"fig2-g1-O01", "fig1-g01"}) {
            const auto m = find_preset(name).model();
            const std::vector<double> grid = {0.0, 100.0};
            const auto heom = heom_converged(m, kernels_for(m), 0.01, grid_step(100.0, 10.0), site_state(2, 0));
            const double h = heom.record.rho.back()(0, 0).real();
            const auto twa = ensemble(Method::Twa, m, 20000, 0.01, grid, 8);
            const auto ctwa = ensemble(Method::Ctwa, m, 20000, 0.01, grid, 8);
            const double et = std::abs(p1(twa, 1) - h), ec = std::abs(p1(ctwa, 1) - h);
            const double slack = 3 * std::hypot(p1_se(twa, 1), p1_se(ctwa, 1));
            ok = ok && ec <= et + slack;
            detail += fmt("%s%s: HEOM %.4f, TWA %.4f +- %.4f, CTWA %.4f +- %.4f", detail.empty() ? "" : "; ", name, h,
                          p1(twa, 1), p1_se(twa, 1), p1(ctwa, 1), p1_se(ctwa, 1));
        }
        return std::pair{ok, detail};
    });

    criterion(9, "exact scheme at desk scale", [&] {
        const PseudoDensityTable table;
        const auto grid = grid_step(0.5, 0.05);
        const auto heom = heom_converged(fig2, kernels_for(fig2), 1e-3, grid, site_state(2, 0));

        // weight growth and sign decay on a horizon the weights survive
        const auto short_grid = grid_step(0.02, 0.005);
        const auto diag = ensemble(Method::Exact, fig2, 100000, 1e-3, short_grid, 91, &table);
        std::string growth;
        for (std::size_t i = 0; i < short_grid.size(); ++i)
            growth += fmt("%s%.3f", i ? "," : "", diag.points[i].avg_sign);
        const std::size_t last = short_grid.size() - 1;
        const auto heom_short =
            heom_propagate(fig2, kernels_for(fig2), heom.depth, 1e-3, short_grid, site_state(2, 0));
        const std::string diag_text =
            fmt("t<=0.02 (1e5 traj): avg sign %s, mean log weight %.1f, ESS %.1f, P1(0.02) %.3g +- %.3g vs HEOM %.4f",
                growth.c_str(), diag.mean_log_weight, diag.points[last].ess, p1(diag, last), p1_se(diag, last),
                heom_short.record.rho[last](0, 0).real());

        try {
            const auto r = ensemble(Method::Exact, fig2, 1000000, 1e-3, grid, 9, &table);
            double worst_z = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i)
                worst_z = std::max(worst_z, std::abs(p1(r, i) - heom.record.rho[i](0, 0).real()) / p1_se(r, i));
            return std::pair{worst_z <= 3.0, fmt("1e6 traj to t=0.5: max deviation %.2f SE, final avg sign %.3g, mean "
                                                 "log weight %.1f; %s",
                                                 worst_z, r.points.back().avg_sign, r.mean_log_weight,
                                                 diag_text.c_str())};
        } catch (const NumericalError& e) {
            return std::pair{false, std::string("1e6 traj to t=0.5 aborted: ") + e.what() + "; " + diag_text};
        }
    });

    criterion(10, "oracle cross-checks", [] {
        // pure dephasing
        SystemModel dep;
        dep.h = CMatrix::Zero(2, 2);
        dep.h(0, 0) = 1.0;
        dep.baths = find_preset("fig2-g1-O01").model().baths;
        const auto grid = grid_step(20.0, 0.5);
        const auto hd = heom_converged(dep, kernels_for(dep), 0.01, grid, plus_state(2));
        const auto pd = pure_dephasing(dep, kernels_for(dep), plus_state(2), grid);
        double dep_err = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            dep_err = std::max(dep_err, (hd.record.rho[i] - pd.rho[i]).cwiseAbs().maxCoeff());
        // closed system
        const auto free = build_donor_acceptor(1.0, 0.4, SpectralDensity::underdamped(0.0, 1.0, 0.1, 2.0));
        const auto hc = heom_propagate(free, kernels_for(free), 4, 0.005, grid, site_state(2, 0));
        const auto cs = closed_system(free, site_state(2, 0), grid);
        double closed_err = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            closed_err = std::max(closed_err, (hc.record.rho[i] - cs.rho[i]).cwiseAbs().maxCoeff());
        // depth convergence on the benchmark dimer
        const SystemModel fig2 = find_preset("fig2-g1-O01").model();
        const auto g100 = grid_step(100.0, 1.0);
        const auto conv = heom_converged(fig2, kernels_for(fig2), 0.01, g100, site_state(2, 0));
        const auto deeper = heom_propagate(fig2, kernels_for(fig2), conv.depth + 2, 0.01, g100, site_state(2, 0));
        double depth_delta = 0.0;
        for (std::size_t i = 0; i < g100.size(); ++i)
            depth_delta = std::max(depth_delta, std::abs(deeper.record.rho[i](0, 0).real() -
                                                         conv.record.rho[i](0, 0).real()));
        return std::pair{dep_err <= 1e-3 && closed_err <= 1e-8 && depth_delta < 1e-4,
                         fmt("HEOM vs dephasing %.1e; HEOM vs closed %.1e; depth %d -> %d |dP1| %.1e", dep_err,
                             closed_err, conv.depth, conv.depth + 2, depth_delta)};
    });

    criterion(11, "determinism across worker counts", [] {
        RunConfig c;
        c.method = RunMethod::Ctwa;
        c.n_traj = 5000;
        c.dt = 0.01;
        c.t_max = 10.0;
        c.n_times = 11;
        c.seed = 11;
        c.workers = 1;
        const std::string a = format_csv(run(c));
        c.workers = 8;
        const std::string b = format_csv(run(c));
        return std::pair{a == b, fmt("CSV with 1 and 8 workers %s (%zu bytes)", a == b ? "identical" : "DIFFER",
                                     a.size())};
    });

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
