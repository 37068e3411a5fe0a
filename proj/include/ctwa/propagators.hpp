#pragma once

#include <vector>

#include "ctwa/auxmap.hpp"
#include "ctwa/model.hpp"
#include "ctwa/wigner.hpp"

namespace ctwa {

enum class Method { Twa, Ctwa, Exact };

/// How the linear part -i h~ dt of a step is applied.
///   Exponential: psi <- exp(-i h~ dt) psi with h~ frozen over the step (norm-preserving).
///   Euler:       psi <- (1 - i h~ dt) psi, the literal first-order scheme.
enum class LinearStep { Exponential, Euler };

struct TwaState {
    CVector psi;
    std::vector<Vector> phi;
    double t = 0.0;
};

struct CtwaState {
    CMatrix R;
    std::vector<Vector> phi;
    double t = 0.0;
};

/// Per-trajectory observables at the grid times. `obs[i]` is the weighted Weyl matrix
/// w_i (psi psi^dagger - 1/2) (or R - 1/2), `weight[i]` the total weight w_i and `sign[i]` its
/// sign product.
struct TrajectoryRecord {
    std::vector<CMatrix> obs;
    std::vector<double> weight;
    std::vector<double> sign;
    double log_weight = 0.0;  ///< final running log weight (exact scheme only)
};

/// Reusable step kernel for one model/map set. Holds scratch buffers so stepping does not allocate.
class Stepper {
  public:
    Stepper(const CMatrix& h, const std::vector<AuxBathMap>& maps, double dt,
            LinearStep linear = LinearStep::Exponential);
    Stepper(const SystemModel& model, const std::vector<AuxBathMap>& maps, double dt,
            LinearStep linear = LinearStep::Exponential)
        : Stepper((model.validate(), model.h), maps, dt, linear) {}

    void twa_step(TwaState& s, RandomStream& rng);
    /// Returns the trace increment sum_{n,m} kappa_m^2 dW_m added this step.
    double ctwa_step(CtwaState& s, RandomStream& rng);

    /// h~ = h - diag(eps^n . phi^n) for the given fields.
    const CMatrix& effective_hamiltonian(const std::vector<Vector>& phi);
    /// Propagator for the linear part using the current h~.
    const CMatrix& linear_propagator();

    /// Draws dW^n_m = sqrt(dt) xi for components with b > 0 (zero elsewhere), in (n, m) order.
    const std::vector<Vector>& draw_increments(RandomStream& rng);
    const std::vector<Vector>& increments() const { return dw_; }
    /// phi^n += (A phi^n + v^n occ2_n) dt + C^n dW^n with C = B (tilde = false) or B~.
    void update_phi(std::vector<Vector>& phi, const Vector& occ2, bool tilde) const;

    const std::vector<AuxBathMap>& maps() const { return maps_; }
    double dt() const { return dt_; }
    int n_sites() const { return static_cast<int>(h_.rows()); }
    LinearStep linear() const { return linear_; }

  private:
    CMatrix h_;
    std::vector<AuxBathMap> maps_;
    double dt_;
    double sqrt_dt_;
    LinearStep linear_;
    CMatrix h_eff_;
    CMatrix u_;
    CMatrix tmp_;
    CVector psi_tmp_;
    Vector occ_;
    std::vector<Vector> dw_;
    mutable Vector scratch_;
};

/// Convenience single steps (allocate a Stepper; use Stepper directly in loops).
void twa_step(TwaState& s, const std::vector<AuxBathMap>& maps, const CMatrix& h, double dt, RandomStream& rng,
              LinearStep linear = LinearStep::Exponential);
double ctwa_step(CtwaState& s, const std::vector<AuxBathMap>& maps, const CMatrix& h, double dt, RandomStream& rng,
                 LinearStep linear = LinearStep::Exponential);

/// Draws phi^n(0) ~ N(0, Sigma^n) for every bath, in site order.
std::vector<Vector> initial_phi(const std::vector<AuxBathMap>& maps, RandomStream& rng);

/// Integrates one TWA or CTWA trajectory from `sample`, recording at the grid times (multiples of dt).
TrajectoryRecord run_trajectory(Method method, Stepper& stepper, const WignerSample& sample,
                                const std::vector<long>& record_steps, RandomStream& rng);

TrajectoryRecord run_trajectory(Method method, const SystemModel& model, const std::vector<AuxBathMap>& maps,
                                const WignerSample& sample, double dt, const std::vector<double>& t_grid,
                                RandomStream& rng, LinearStep linear = LinearStep::Exponential);

/// exp(-i h dt) for Hermitian h (closed form for 2x2, eigendecomposition otherwise).
void hermitian_propagator(const CMatrix& h, double dt, CMatrix& out);

std::string to_string(Method m);
Method method_from_string(const std::string& s);

}  // namespace ctwa
