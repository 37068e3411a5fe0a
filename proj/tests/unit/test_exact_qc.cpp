#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ctwa/exact_qc.hpp"

using namespace ctwa;

namespace {

TableParams small_params() {
    TableParams p;
    p.dx = 0.05;
    return p;
}

const PseudoDensityTable& small_table() {
    static const PseudoDensityTable t(small_params());
    return t;
}

int slice_of(const PseudoDensityTable& t, double x) {
    return static_cast<int>(std::lround((x - t.params().x_min) / t.params().dx));
}

double f_rx_adaptive(double r, double x) {
    auto integrand = [&](double rho) {
        const double p2 = rho * rho;
        return rho * std::exp(-0.5 * (p2 * p2 + 2.0 * p2 * x)) * std::cyl_bessel_j(0.0, rho * r);
    };
    return r * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 12.0, 15, 1e-14);
}

// int_0^r_max |f(r|x)| dr: sign changes located with TOMS 748, smooth pieces by Gauss-Kronrod.
double abs_integral(double x, double r_max) {
    using boost::math::quadrature::gauss_kronrod;
    auto f = [&](double r) { return f_rx(r, x); };
    std::vector<double> cuts = {0.0};
    const double h = 0.2;
    for (double a = 0.0; a < r_max - 1e-12; a += h) {
        const double b = std::min(a + h, r_max);
        const double fa = f(a), fb = f(b);
        if (fa * fb < 0.0) {
            boost::uintmax_t it = 100;
            const auto root = boost::math::tools::toms748_solve(
                f, a, b, fa, fb, [](double l, double u) { return std::abs(u - l) < 1e-13; }, it);
            cuts.push_back(0.5 * (root.first + root.second));
        }
        cuts.push_back(b);
    }
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i])
            s += std::abs(gauss_kronrod<double, 15>::integrate(f, cuts[i], cuts[i + 1], 0));
    return s;
}

}  // namespace

TEST_CASE("f(r|x) against adaptive quadrature") {
    for (double x : {-3.0, -1.0, 0.0, 0.7, 2.0, 4.0})
        for (double r : {0.0, 0.01, 0.3, 1.0, 2.5, 6.0, 15.0}) {
            const double ref = f_rx_adaptive(r, x);
            CHECK_MESSAGE(std::abs(f_rx(r, x) - ref) < 1e-12, "r=", r, " x=", x);
        }
    CHECK(f_rx(-0.5, 0.0) == 0.0);
}

TEST_CASE("f(r|x) integrates to one") {
    using boost::math::quadrature::gauss_kronrod;
    for (double x : {-1.0, 0.0, 1.0, 2.0}) {
        double s = 0.0;
        for (int i = 0; i < 160; ++i)
            s += gauss_kronrod<double, 15>::integrate([&](double r) { return f_rx(r, x); }, i * 0.2, (i + 1) * 0.2, 0);
        CHECK_MESSAGE(std::abs(s - 1.0) < 1e-6, "x=", x);
    }
}

TEST_CASE("tabulated norms against refined quadrature") {
    const auto& t = small_table();
    for (double x : {-1.0, 0.0, 1.0, 2.0}) {
        const double n = abs_integral(x, 32.0);
        CHECK_MESSAGE(std::abs(t.norm(slice_of(t, x)) - n) < 1e-5, "x=", x, " table ", t.norm(slice_of(t, x)), " quad ", n);
    }
}

TEST_CASE("table nodes reproduce f(r|x)") {
    const auto& t = small_table();
    CHECK(t.n_x() == 201);
    CHECK(t.n_r() == 8001);
    for (int k : {0, 17, 40, 100, 200})
        for (int i : {0, 5, 100, 800, 8000}) CHECK(std::abs(t.value(k, i) - f_rx(t.r_at(i), t.x_at(k))) < 1e-12);
    // outside the tabulated range interpolate falls back to direct quadrature
    CHECK(t.interpolate(1.2, 5.5) == f_rx(1.2, 5.5));
}

TEST_CASE("moment identities") {
    for (double dt : {1.0, 1e-3}) {
        const auto rep = moments_check(small_table(), dt);
        CHECK_MESSAGE(rep.ok, "dt=", dt, " residual ", rep.max_residual);
        CHECK(rep.max_residual < 1e-4);
        REQUIRE(rep.rows.size() == 4);
        for (const auto& row : rep.rows) {
            CHECK(std::abs(row.zeroth - 1.0) < 1e-4);
            CHECK(std::abs(row.second - std::sqrt(dt) * row.x) < 1e-4);
            CHECK(std::abs(row.fourth - 2 * dt * (row.x * row.x - 1)) < 1e-4);
        }
    }
}

TEST_CASE("N(f, x) values, bound and monotonicity") {
    const auto& t = small_table();
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < t.n_x(); ++k) {
        CHECK(t.norm(k) >= 1.0);
        CHECK(t.norm(k) <= prev + 1e-12);
        prev = t.norm(k);
    }
    auto norm_at = [&](double x) { return t.norm(slice_of(t, x)); };
    CHECK(norm_at(-1.0) == doctest::Approx(3.645).epsilon(1e-3));
    CHECK(norm_at(0.0) == doctest::Approx(1.515).epsilon(1e-3));
    CHECK(norm_at(1.0) == doctest::Approx(1.108).epsilon(1e-3));
    CHECK(norm_at(2.0) == doctest::Approx(1.0204).epsilon(1e-3));
}

TEST_CASE("sampler follows |f| / N") {
    const auto& t = small_table();
    const int k = slice_of(t, 0.0);
    const double x = t.x_at(k);
    RandomStream rng(13);
    const int n = 100000;
    std::vector<double> r(n);
    for (int j = 0; j < n; ++j) {
        const auto d = t.sample(x, rng);
        r[j] = d.r;
        CHECK(d.norm == t.norm(k));
        const double f = t.interpolate(d.r, x);
        if (std::abs(f) > 1e-9) CHECK(d.sign == (f > 0 ? 1.0 : -1.0));
    }
    std::sort(r.begin(), r.end());
    // CDF of |f| from the piecewise-linear slice by fine midpoint sums
    const int fine = 200000;
    const double r_end = 8.0;
    std::vector<double> cdf(fine + 1, 0.0);
    for (int i = 0; i < fine; ++i) {
        const double a = r_end * i / fine, b = r_end * (i + 1) / fine;
        cdf[i + 1] = cdf[i] + (b - a) * std::abs(t.interpolate(0.5 * (a + b), x));
    }
    const double total = t.norm(k);
    double d = 0.0;
    for (int j = 0; j < n; j += 7) {
        const auto idx = std::min<std::size_t>(fine, static_cast<std::size_t>(r[j] / r_end * fine));
        const double F = cdf[idx] / total;
        d = std::max({d, std::abs(F - double(j) / n), std::abs(F - double(j + 1) / n)});
    }
    CHECK(d < 1e-2);
}

TEST_CASE("between slices the sampler mixes neighbouring norms") {
    const auto& t = small_table();
    RandomStream rng(2);
    const int k = slice_of(t, 0.0);
    const double x = 0.5 * (t.x_at(k) + t.x_at(k + 1));
    int upper = 0;
    const int n = 20000;
    for (int j = 0; j < n; ++j) upper += t.sample(x, rng).norm == t.norm(k + 1);
    CHECK(std::abs(double(upper) / n - 0.5) < 0.02);
    // off-table slices are computed on the fly
    const auto d = t.sample(5.5, rng);
    CHECK(d.norm >= 1.0);
    CHECK(d.norm < 1.01);
}

TEST_CASE("exact step without corrections equals the TWA step") {
    auto model = find_preset("fig2-g1-O01").model();
    std::vector<AuxBathMap> maps;
    for (const auto& b : model.baths) maps.push_back(build_map(decompose(b), b));
    for (auto& m : maps) m.kappa.setZero();
    Stepper st(model, maps, 0.01);
    RandomStream ra(5), rb(5);
    WeightedTrajectory w{CVector::Zero(2), initial_phi(maps, ra), 0.0, 1.0, 0.0};
    TwaState s{CVector::Zero(2), initial_phi(maps, rb), 0.0};
    w.psi << Complex(0.9, 0.1), Complex(0.2, 0.3);
    s.psi = w.psi;
    for (int k = 0; k < 500; ++k) {
        exact_step(w, st, small_table(), ra);
        st.twa_step(s, rb);
    }
    CHECK((w.psi - s.psi).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(w.log_weight == 0.0);
    CHECK(w.sign_product == 1.0);
}

TEST_CASE("exact trajectories: weights, records and overflow") {
    auto model = find_preset("fig2-g1-O01").model();
    std::vector<AuxBathMap> maps;
    for (const auto& b : model.baths) maps.push_back(build_map(decompose(b), b));
    Stepper st(model, maps, 1e-3);
    LocalizedSampler sampler(2, 0);
    RandomStream rng(8);
    const auto ws = sampler.sample(rng);

    const auto rec0 = run_exact(st, small_table(), ws, {0}, rng);
    CHECK(rec0.weight[0] == ws.sign * ws.norm);
    CHECK(rec0.obs[0] == ws.sign * ws.norm * weyl_matrix(ws.psi0));
    CHECK(rec0.log_weight == 0.0);

    WeightedTrajectory w{ws.psi0, initial_phi(maps, rng), 0.0, 1.0, 0.0};
    double prev = 0.0;
    for (int k = 0; k < 200; ++k) {
        exact_step(w, st, small_table(), rng);
        CHECK(w.log_weight >= prev);
        prev = w.log_weight;
    }
    CHECK(w.log_weight > 0.0);
    CHECK(std::abs(w.sign_product) == 1.0);

    CHECK_THROWS_AS(run_exact(st, small_table(), ws, {5000}, rng), NumericalError);
}

TEST_CASE("kick size scales as dt^(1/4)") {
    // weighted E[|dchi|^2 | x] = sqrt(dt) x from sampled kicks
    const auto& t = small_table();
    RandomStream rng(4);
    for (double dt : {1e-2, 1e-4}) {
        const double q4 = std::pow(dt, 0.25);
        double s = 0.0;
        const int n = 200000;
        const double x = 1.0;
        for (int j = 0; j < n; ++j) {
            const auto d = t.sample(x, rng);
            const double chi = 0.5 * q4 * d.r;
            s += d.sign * d.norm * chi * chi;
        }
        CHECK(s / n / std::sqrt(dt) == doctest::Approx(x).epsilon(0.05));
    }
}

TEST_CASE("RMS kick scales as dt^(1/4)") {
    const auto& t = small_table();
    auto rms = [&](double dt) {
        RandomStream rng(77);
        double s = 0.0;
        const int n = 20000;
        for (int j = 0; j < n; ++j) {
            const double x = rng.normal();
            const double r = t.sample(x, rng).r;
            const double chi = 0.5 * std::pow(dt, 0.25) * r;
            s += chi * chi;
        }
        return std::sqrt(s / n);
    };
    CHECK(rms(5e-4) / rms(1e-3) == doctest::Approx(std::pow(2.0, -0.25)).epsilon(0.01));
}

TEST_CASE("table cache round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "ctwa_table_test.bin").string();
    std::filesystem::remove(path);
    TableParams p = small_params();
    p.dx = 0.25;
    p.dr = 0.02;
    const auto a = PseudoDensityTable::load_or_build(p, path);
    REQUIRE(std::filesystem::exists(path));
    const auto b = PseudoDensityTable::load_or_build(p, path);
    CHECK(a.n_x() == b.n_x());
    for (int k = 0; k < a.n_x(); ++k) {
        CHECK(a.norm(k) == b.norm(k));
        CHECK(a.value(k, 123) == b.value(k, 123));
    }
    TableParams q = p;
    q.dr = 0.04;
    const auto c = PseudoDensityTable::load_or_build(q, path);  // different params: rebuilt
    CHECK(c.n_r() == 801);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(PseudoDensityTable::load_or_build(p, "/nonexistent-dir/t.bin"), IoError);
    TableParams bad = p;
    bad.dx = -1;
    CHECK_THROWS_AS(PseudoDensityTable{bad}, ConfigError);
}
