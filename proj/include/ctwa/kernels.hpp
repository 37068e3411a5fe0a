#pragma once

#include <vector>

#include "ctwa/model.hpp"

namespace ctwa {

/// One exponential e^{lambda t} contributing alpha_F to F(t)/pi and alpha_D to D(t)/pi.
struct KernelTerm {
    Complex lambda;
    Complex alpha_f;
    Complex alpha_d;
    bool matsubara = false;
};

/// Noise and dissipation kernels of one bath as exponential sums:
///   F(t)/pi = sum_l alpha_F,l e^{lambda_l t},   D(t)/pi = sum_l alpha_D,l e^{lambda_l t}.
struct ExponentialKernel {
    std::vector<KernelTerm> terms;
    int matsubara_cutoff = 0;

    bool empty() const { return terms.empty(); }
};

/// Exponential decomposition of the kernels of `bath`.
///
/// With `high_temperature` the approximation coth(w/2T) ~ 2T/w is used and all Matsubara
/// sums are dropped (`matsubara_terms` is ignored). Otherwise the oscillator-pole
/// coefficients use the complete (resummed) Matsubara sums and the first `matsubara_terms`
/// frequencies nu_l = 2 pi l T are kept as extra real exponentials.
ExponentialKernel decompose(const SpectralDensity& bath, bool high_temperature = true, int matsubara_terms = 0);

double eval_dissipation(const ExponentialKernel& kernel, double t);  ///< D(t)/pi
double eval_noise(const ExponentialKernel& kernel, double t);        ///< F(t)/pi

/// Closed-form high-temperature D(t)/pi, [a1 C(Wt) + a2 S(Wt)] e^{-g t}.
double dissipation_closed_form(const SpectralDensity& bath, double t);
/// Closed-form high-temperature F(t)/pi.
double noise_closed_form(const SpectralDensity& bath, double t);

/// Normalized memory kernel g(t) = D(t) / (pi a').
double memory_kernel(const SpectralDensity& bath, double t);

}  // namespace ctwa
