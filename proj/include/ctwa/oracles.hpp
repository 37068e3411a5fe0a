#pragma once

#include <vector>

#include "ctwa/kernels.hpp"
#include "ctwa/model.hpp"

namespace ctwa {

/// Reduced density matrices at a list of times.
struct DensityRecord {
    std::vector<double> t;
    std::vector<CMatrix> rho;
};

/// |n0><n0| (0-based site).
CMatrix site_state(int n_sites, int n0);
/// Uniform superposition sum_n |n> / sqrt(N).
CMatrix plus_state(int n_sites);

/// Exact unitary evolution of rho0 under h (dense eigendecomposition).
DensityRecord closed_system(const SystemModel& model, const CMatrix& rho0, const std::vector<double>& t_grid);

/// g(t) = int_0^t dtau int_0^tau ds C(s), C = F/pi - i D/pi, in closed form from the exponential terms.
Complex lineshape(const ExponentialKernel& kernel, double t);

/// Independent-boson solution for diagonal h: populations frozen,
/// rho_nm(t) = rho_nm(0) e^{-i (h_nn - h_mm) t} e^{-g_n(t) - conj(g_m(t))}.
/// Throws ConfigError for nonzero off-diagonal h.
DensityRecord pure_dephasing(const SystemModel& model, const std::vector<ExponentialKernel>& kernels,
                             const CMatrix& rho0, const std::vector<double>& t_grid);

struct HeomResult {
    DensityRecord record;
    int depth = 0;
    int n_ados = 0;
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    /// max_t |P_1(depth) - P_1(depth - 2)| from the convergence driver (NaN for a single solve).
    double convergence_delta = 0.0;
};

/// Hierarchical equations of motion for C_n(t) = sum_l c_l e^{lambda_l t}, c_l = alpha_F - i alpha_D, with
/// V_n = |n><n|, truncated at total tier `depth`, fixed-step RK4. t_grid entries must be multiples of dt.
HeomResult heom_propagate(const SystemModel& model, const std::vector<ExponentialKernel>& kernels, int depth,
                          double dt, const std::vector<double>& t_grid, const CMatrix& rho0);

/// Runs depth = start, start + 2, ... until max_t |Delta P_1| < tol between successive depths.
/// Throws NumericalError if max_depth is reached without convergence.
HeomResult heom_converged(const SystemModel& model, const std::vector<ExponentialKernel>& kernels, double dt,
                          const std::vector<double>& t_grid, const CMatrix& rho0, int start_depth = 4,
                          int max_depth = 40, double tol = 1e-4);

/// Number of multi-indices with K components and total <= depth.
long heom_ado_count(int n_terms, int depth);

}  // namespace ctwa
