#include "ctwa/kernels.hpp"

#include <cmath>

namespace ctwa {

namespace {

struct OscillatorSums {
    double f_s;
    double f_a;
};

// f_S and f_A: the high-temperature limit 1/(g^2 +- W^2) terms only, or the complete Matsubara
// sums resummed with  sum_l 2 z / (nu_l^2 - z^2) = 1/z - cot(z/2T)/(2T).
OscillatorSums oscillator_sums(const SpectralDensity& bath, bool high_temperature) {
    const double w2 = bath.shifted_frequency_sq();
    const double omega = bath.family == BathFamily::Drude ? 0.0 : bath.omega;
    if (high_temperature) return {bath.gamma / w2, omega / w2};

    const double T = bath.temperature;
    auto cot = [](Complex z) { return 1.0 / std::tan(z); };
    for (double pole : {bath.gamma - omega, bath.gamma + omega}) {
        const double k = pole / (2.0 * kPi * T);
        if (bath.branch == Branch::Hyp || bath.family == BathFamily::Drude)
            if (std::abs(k - std::round(k)) < 1e-12 && std::round(k) >= 1.0)
                throw NumericalError("Matsubara frequency coincides with a bath pole");
    }
    if (bath.family == BathFamily::Underdamped && bath.branch == Branch::Hyp) {
        const double cm = cot(Complex((bath.gamma - omega) / (2.0 * T), 0.0)).real();
        const double cp = cot(Complex((bath.gamma + omega) / (2.0 * T), 0.0)).real();
        return {(cm + cp) / (4.0 * T), (cm - cp) / (4.0 * T)};
    }
    const Complex c = cot(Complex(bath.gamma, omega) / (2.0 * T));
    return {c.real() / (2.0 * T), -c.imag() / (2.0 * T)};
}

// Splits c_C C(Wt) + c_S S(Wt) into the two exponentials e^{(-g +- iW) t} (trig) or e^{(-g +- W) t}.
void push_pair(std::vector<KernelTerm>& terms, const SpectralDensity& bath, double f_cos, double f_sin,
               double d_cos, double d_sin) {
    const double g = bath.gamma;
    const double w = bath.omega;
    if (bath.branch == Branch::Trig) {
        const Complex i(0.0, 1.0);
        terms.push_back({Complex(-g, w), 0.5 * (f_cos - i * f_sin), 0.5 * (d_cos - i * d_sin), false});
        terms.push_back({Complex(-g, -w), 0.5 * (f_cos + i * f_sin), 0.5 * (d_cos + i * d_sin), false});
    } else {
        terms.push_back({Complex(-g + w, 0.0), 0.5 * (f_cos + f_sin), 0.5 * (d_cos + d_sin), false});
        terms.push_back({Complex(-g - w, 0.0), 0.5 * (f_cos - f_sin), 0.5 * (d_cos - d_sin), false});
    }
}

}  // namespace

ExponentialKernel decompose(const SpectralDensity& bath, bool high_temperature, int matsubara_terms) {
    bath.validate();
    if (!high_temperature && matsubara_terms < 0) throw ConfigError("Matsubara cutoff must be >= 0");
    const int L = high_temperature ? 0 : matsubara_terms;
    ExponentialKernel kernel;
    kernel.matsubara_cutoff = L;
    if (bath.coupling == 0.0) return kernel;

    const double T = bath.temperature;
    const auto [f_s, f_a] = oscillator_sums(bath, high_temperature);
    const double a1 = bath.a1();
    const double a2 = bath.a2();

    if (bath.family == BathFamily::Drude) {
        kernel.terms.push_back({Complex(-bath.gamma, 0.0), Complex(2.0 * T * a1 * f_s, 0.0), Complex(a1, 0.0), false});
    } else {
        const double mp = bath.branch == Branch::Trig ? -1.0 : 1.0;  // the "-+" sign
        const double f_cos = 2.0 * T * (a1 * f_s + a2 * f_a);
        const double f_sin = 2.0 * T * (a2 * f_s + mp * a1 * f_a);
        push_pair(kernel.terms, bath, f_cos, f_sin, a1, a2);
    }

    for (int l = 1; l <= L; ++l) {
        const double nu = 2.0 * kPi * l * T;
        const Complex residue = 2.0 * T * Complex(0.0, 1.0) * bath.spectral_density(Complex(0.0, nu));
        kernel.terms.push_back({Complex(-nu, 0.0), Complex(residue.real(), 0.0), Complex(0.0, 0.0), true});
    }
    return kernel;
}

double eval_dissipation(const ExponentialKernel& kernel, double t) {
    Complex s = 0.0;
    for (const auto& term : kernel.terms) s += term.alpha_d * std::exp(term.lambda * t);
    return s.real();
}

double eval_noise(const ExponentialKernel& kernel, double t) {
    Complex s = 0.0;
    for (const auto& term : kernel.terms) s += term.alpha_f * std::exp(term.lambda * t);
    return s.real();
}

namespace {

std::pair<double, double> cs(const SpectralDensity& bath, double t) {
    if (bath.family == BathFamily::Drude) return {1.0, 0.0};
    const double x = bath.omega * t;
    if (bath.branch == Branch::Trig) return {std::cos(x), std::sin(x)};
    return {std::cosh(x), std::sinh(x)};
}

}  // namespace

double dissipation_closed_form(const SpectralDensity& bath, double t) {
    const auto [c, s] = cs(bath, t);
    return (bath.a1() * c + bath.a2() * s) * std::exp(-bath.gamma * t);
}

double noise_closed_form(const SpectralDensity& bath, double t) {
    const auto [c, s] = cs(bath, t);
    const double w2 = bath.shifted_frequency_sq();
    const double omega = bath.family == BathFamily::Drude ? 0.0 : bath.omega;
    const double f_s = bath.gamma / w2;
    const double f_a = omega / w2;
    const double mp = (bath.family == BathFamily::Underdamped && bath.branch == Branch::Hyp) ? 1.0 : -1.0;
    const double a1 = bath.a1();
    const double a2 = bath.a2();
    const double T = bath.temperature;
    return (2.0 * T * (a1 * f_s + a2 * f_a) * c + 2.0 * T * (a2 * f_s + mp * a1 * f_a) * s) *
           std::exp(-bath.gamma * t);
}

double memory_kernel(const SpectralDensity& bath, double t) {
    if (bath.family == BathFamily::Drude) return bath.gamma * std::exp(-bath.gamma * t);
    const auto [c, s] = cs(bath, t);
    return std::exp(-bath.gamma * t) * s * bath.shifted_frequency_sq() / bath.omega;
}

}  // namespace ctwa
