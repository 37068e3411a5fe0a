#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ctwa/propagators.hpp"

namespace ctwa {

/// f_{R|X}(r|x) = int_0^inf d rho rho r e^{-(rho^4 + 2 rho^2 x)/2} J0(rho r) for r >= 0, 0 otherwise.
/// Composite Gauss-Legendre in rho on [0, rho_max(x)].
double f_rx(double r, double x);

struct TableParams {
    double x_min = -5.0;
    double x_max = 5.0;
    double dx = 0.01;
    double r_max = 32.0;
    double dr = 0.004;
    int rho_panels = 64;  ///< Gauss-Legendre panels (10 nodes each) on rho in [0, 4]

    bool operator==(const TableParams&) const = default;
};

/// Tabulated f(r|x) on a rectangular (x, r) grid. Between r nodes f is linear; between
/// x slices the sampler picks one of the two neighbouring slices at random with the linear
/// interpolation weights, which keeps the weighted estimator unbiased for the interpolated f.
class PseudoDensityTable {
  public:
    struct Draw {
        double r;
        double sign;  ///< Sign(f, r, x)
        double norm;  ///< N(f, x) of the slice used
    };

    explicit PseudoDensityTable(const TableParams& params = {});

    /// Loads from `path` if it holds a table with identical parameters, else builds and saves it.
    static PseudoDensityTable load_or_build(const TableParams& params, const std::string& path);
    void save(const std::string& path) const;

    const TableParams& params() const { return params_; }
    int n_x() const { return n_x_; }
    int n_r() const { return n_r_; }
    double x_at(int k) const { return params_.x_min + k * params_.dx; }
    double r_at(int i) const { return i * params_.dr; }
    /// f at node (r_i, x_k).
    double value(int k, int i) const { return values_[static_cast<std::size_t>(k) * n_r_ + i]; }
    /// N(f, x_k) = int |f| dr for the piecewise-linear slice.
    double norm(int k) const { return cumulative_[static_cast<std::size_t>(k) * n_r_ + n_r_ - 1]; }
    /// Piecewise-linear f in r and linear in x; computes slices on the fly outside the x range.
    double interpolate(double r, double x) const;

    /// Draws r ~ |f(.|x)| / N(f, x).
    Draw sample(double x, RandomStream& rng) const;

  private:
    TableParams params_;
    int n_x_ = 0;
    int n_r_ = 0;
    std::vector<double> values_;
    std::vector<double> cumulative_;  ///< running int_0^r |f| per slice
    // J0(rho_j r_i) on the fixed rho rule, reused for off-table slices
    std::shared_ptr<const Matrix> bessel_;
    std::vector<double> rule_rho_;
    std::vector<double> rule_weight_;

    struct Uninitialized {};
    explicit PseudoDensityTable(Uninitialized) {}
    void build();
    void build_rule();
    std::vector<double> slice(double x) const;
    void accumulate(const double* f, double* cum) const;
    static Draw sample_slice(const double* f, const double* cum, int n_r, double dr, RandomStream& rng);
};

struct MomentRow {
    double x;
    double zeroth;         ///< int f dr
    double second;         ///< E[dchi dchi*]
    double second_expected;
    double fourth;         ///< E[(dchi dchi*)^2]
    double fourth_expected;
    double mean_chi;       ///< |E[dchi]|
    double norm;           ///< N(f, x)
};

struct MomentsReport {
    std::vector<MomentRow> rows;
    double max_residual = 0.0;
    double min_norm = 0.0;  ///< smallest N(f, x_k) over all tabulated slices
    bool ok = false;
};

/// Checks int f = 1, E[dchi dchi*] = sqrt(dt) x, E[(dchi dchi*)^2] = 2 dt (x^2 - 1) by quadrature of the
/// tabulated f over (r, theta), dchi = dt^{1/4} r e^{i theta} / 2, and N(f, x) >= 1 on every slice.
MomentsReport moments_check(const PseudoDensityTable& table, double dt, const std::vector<double>& xs = {-1, 0, 1, 2},
                            double tol = 1e-4);

struct WeightedTrajectory {
    CVector psi;
    std::vector<Vector> phi;
    double log_weight = 0.0;
    double sign_product = 1.0;
    double t = 0.0;
};

/// One step of the exact scheme: TWA drift with B~ and x = dW / sqrt(dt), plus kappa dchi kicks drawn from the
/// table for every component with kappa > 0.
void exact_step(WeightedTrajectory& traj, Stepper& stepper, const PseudoDensityTable& table, RandomStream& rng);

inline constexpr double kLogWeightLimit = 700.0;

/// Exact-scheme trajectory; recorded weights are sign * norm * sign_product * exp(log_weight).
/// Throws NumericalError when log_weight exceeds kLogWeightLimit.
TrajectoryRecord run_exact(Stepper& stepper, const PseudoDensityTable& table, const WignerSample& sample,
                           const std::vector<long>& record_steps, RandomStream& rng);

}  // namespace ctwa
