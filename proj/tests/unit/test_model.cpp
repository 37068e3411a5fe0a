#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ctwa/model.hpp"

using namespace ctwa;

TEST_CASE("donor/acceptor Hamiltonian") {
    const auto bath = SpectralDensity::underdamped(0.1, 1.0, 0.1, 2.0);
    const SystemModel m = build_donor_acceptor(1.0, 0.4, bath);
    CHECK(m.n_sites() == 2);
    CHECK(m.baths.size() == 2);
    CHECK(m.h(0, 0) == Complex(1.0));
    CHECK(m.h(0, 1) == Complex(0.4));
    CHECK(m.h(1, 0) == Complex(0.4));
    CHECK(m.h(1, 1) == Complex(0.0));
    CHECK((m.h - m.h.adjoint()).norm() == 0.0);

    Eigen::SelfAdjointEigenSolver<CMatrix> es(m.h);
    const double split = es.eigenvalues()(1) - es.eigenvalues()(0);
    CHECK(split == doctest::Approx(std::sqrt(1.0 + 4 * 0.16)).epsilon(1e-14));

    const SystemModel diag = build_donor_acceptor(1.0, 0.0, bath);
    CHECK(diag.h(0, 1) == Complex(0.0));

    const SystemModel degenerate = build_donor_acceptor(0.0, 0.4, bath);
    CHECK(degenerate.h(0, 0) == degenerate.h(1, 1));
}

TEST_CASE("reorganization energy") {
    CHECK(reorganization_energy(SpectralDensity::drude(0.1, 1.0, 2.0)) == 0.1);
    CHECK(reorganization_energy(SpectralDensity::underdamped(0.0, 1.0, 0.1, 2.0)) == 0.0);
    CHECK(reorganization_energy(SpectralDensity::underdamped(0.1, 1.0, 0.1, 2.0)) == 0.1);
}

TEST_CASE("bath validation") {
    CHECK_THROWS_AS(SpectralDensity::underdamped(0.1, 0.0, 0.1, 2.0), ConfigError);
    CHECK_THROWS_AS(SpectralDensity::underdamped(0.1, 1.0, 0.0, 2.0), ConfigError);
    CHECK_THROWS_AS(SpectralDensity::underdamped(0.1, 1.0, 1.0, 2.0, Branch::Hyp), ConfigError);
    CHECK_THROWS_AS(SpectralDensity::underdamped(-0.1, 1.0, 0.1, 2.0), ConfigError);
    CHECK_THROWS_AS(SpectralDensity::drude(0.1, 1.0, 0.0), ConfigError);
    CHECK_NOTHROW(SpectralDensity::underdamped(0.1, 1.0, 0.5, 2.0, Branch::Hyp));

    SystemModel m;
    m.h = CMatrix::Zero(2, 2);
    m.h(0, 1) = Complex(0.0, 1.0);
    m.h(1, 0) = Complex(0.0, 1.0);
    m.baths = {SpectralDensity::drude(0.1, 1.0, 1.0), SpectralDensity::drude(0.1, 1.0, 1.0)};
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m.h(1, 0) = Complex(0.0, -1.0);
    CHECK_NOTHROW(m.validate());
    m.baths.pop_back();
    CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("presets") {
    const auto& presets = benchmark_presets();
    CHECK(presets.size() == 12);
    const BenchmarkConfig fig2 = find_preset("fig2-g1-O01");
    CHECK(fig2.delta == 1.0);
    CHECK(fig2.h12 == 0.4);
    CHECK(fig2.temperature == 2.0);
    CHECK(fig2.gamma == 1.0);
    CHECK(fig2.omega == 0.1);
    CHECK(fig2.a2p == 0.1);
    CHECK(fig2.a1p == 0.0);
    CHECK(fig2.family == BathFamily::Underdamped);

    const BenchmarkConfig fig1 = find_preset("fig1-g01");
    CHECK(fig1.family == BathFamily::Drude);
    CHECK(fig1.gamma == 0.1);

    for (const auto& p : presets) {
        if (p.name.rfind("fig3", 0) == 0) CHECK(p.temperature == 0.2);
        if (p.name.rfind("fig2", 0) == 0) CHECK(p.temperature == 2.0);
        CHECK_NOTHROW(p.model());
    }
    CHECK_THROWS_AS(find_preset("fig9"), ConfigError);
}

TEST_CASE("preset serialization round-trips bit-exactly") {
    for (const auto& p : benchmark_presets()) {
        const auto back = BenchmarkConfig::deserialize(p.serialize());
        CHECK(back == p);
    }
    BenchmarkConfig odd = find_preset("fig2-g1-O01");
    odd.gamma = 0.1 + 0.2;
    odd.h12 = 1.0 / 3.0;
    CHECK(BenchmarkConfig::deserialize(odd.serialize()) == odd);
    CHECK_THROWS_AS(BenchmarkConfig::deserialize("gamma = abc\n"), ConfigError);
    CHECK_THROWS_AS(BenchmarkConfig::deserialize("bogus = 1\n"), ConfigError);
}

TEST_CASE("time grids") {
    const auto g = uniform_grid(1.0, 11);
    CHECK(g.size() == 11);
    CHECK(g.back() == 1.0);
    const auto steps = grid_steps(g, 1e-3);
    CHECK(steps[10] == 1000);
    CHECK(steps[3] == 300);
    CHECK_THROWS_AS(grid_steps({0.0, 0.00015}, 1e-3), ConfigError);
    CHECK(uniform_grid(0.0, 1) == std::vector<double>{0.0});
}
