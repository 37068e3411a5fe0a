#pragma once

#include <string>
#include <vector>

#include "ctwa/kernels.hpp"
#include "ctwa/rng.hpp"

namespace ctwa {

/// Time-local auxiliary representation of one bath.
///
/// The auxiliary fields obey  d phi = (A phi + v n_o) dt + B dW  and couple to the system
/// through eps^T phi. A is block diagonal: one 2x2 oscillator block (or none, for an empty
/// kernel) followed by 1x1 Matsubara blocks.
struct AuxBathMap {
    struct Block {
        int offset;
        int size;
    };

    Matrix A;
    Vector v;
    Vector eps;
    Vector b;        ///< diagonal of B, nonnegative
    Vector b_tilde;  ///< -sign(v_m) b_m, or b_m where v_m = 0
    Matrix sigma;    ///< stationary covariance: A Sigma + Sigma A^T + B B^T = 0
    Matrix sigma_factor;  ///< L with L L^T = Sigma
    Vector kappa;    ///< sqrt(|v_m| / (2 b_m)) where b_m > 0, else 0
    std::vector<Block> blocks;

    int dim() const { return static_cast<int>(v.size()); }
    /// Any component with nonzero kappa (quantum-correction noise present).
    bool has_corrections() const;
};

/// Builds and verifies the map for `kernel` (obtained from `bath` via decompose).
/// Throws NumericalError if the noise kernel needs a negative b^2 or verification fails.
AuxBathMap build_map(const ExponentialKernel& kernel, const SpectralDensity& bath);

/// Completes a map from (A, v, eps, b, blocks): computes b_tilde, sigma, sigma_factor and kappa.
void finalize_map(AuxBathMap& map);

struct MapReport {
    bool ok = true;
    double d_residual = 0.0;  ///< max |eps^T e^{At} v - D(t)/pi|
    double d_scale = 0.0;     ///< max |D(t)/pi|
    double d_worst_t = 0.0;
    double f_residual = 0.0;  ///< max |stationary part of m(t,t') - F(t-t')/pi|
    double f_scale = 0.0;
    double f_worst_t = 0.0;
    double f_worst_t_prime = 0.0;
    std::string message;
};

/// Compares the map against the kernel on `t_grid` (and all pairs t >= t' from it) with
/// tolerance relative to max|D/pi| and max|F/pi|.
MapReport verify_map(const AuxBathMap& map, const ExponentialKernel& kernel, const std::vector<double>& t_grid,
                     double tol);

/// Solution of A Sigma + Sigma A^T = -B B^T for Hurwitz A (dense Kronecker solve).
Matrix stationary_covariance(const Matrix& A, const Matrix& B);

/// Draws phi(0) ~ N(0, Sigma) using the map's factor.
Vector sample_phi0(const AuxBathMap& map, RandomStream& rng);
/// Draws phi ~ N(0, sigma) for an arbitrary PSD covariance.
Vector sample_gaussian(const Matrix& sigma, RandomStream& rng);

/// e^{A t} respecting the block structure.
Matrix block_exp(const AuxBathMap& map, double t);

/// Row vector eps^T e^{At} B, the response of the coupling eps^T phi to a noise kick.
Vector noise_response(const AuxBathMap& map, double t);

}  // namespace ctwa
