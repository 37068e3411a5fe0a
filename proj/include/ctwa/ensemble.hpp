#pragma once

#include <cstdint>
#include <vector>

#include "ctwa/exact_qc.hpp"
#include "ctwa/exact_sum.hpp"
#include "ctwa/propagators.hpp"

namespace ctwa {

/// Ensemble estimate at one grid time.
struct WeightedEstimate {
    double t = 0.0;
    CMatrix mean;       ///< sum_k w_k O_k / n_traj
    Matrix se_re;       ///< standard error of Re(mean); NaN for a single trajectory
    Matrix se_im;
    Matrix se;          ///< sqrt(se_re^2 + se_im^2)
    double avg_sign = 0.0;
    double ess = 0.0;   ///< (sum |w|)^2 / sum w^2
    long n_traj = 0;
};

struct EnsembleResult {
    Method method = Method::Twa;
    std::vector<WeightedEstimate> points;
    long n_traj = 0;
    double mean_log_weight = 0.0;  ///< exact scheme: mean final log weight
    double max_log_weight = 0.0;
};

/// Order-independent accumulator of trajectory records.
class EnsembleAccumulator {
  public:
    EnsembleAccumulator(int n_sites, std::size_t n_times);
    void add(const TrajectoryRecord& rec);
    void merge(const EnsembleAccumulator& other);
    EnsembleResult finish(Method method, const std::vector<double>& t_grid) const;
    long count() const { return n_; }

  private:
    int N_;
    std::size_t n_times_;
    long n_ = 0;
    // per time: [re, re^2, im, im^2] per matrix element, then sign, |w|, w^2
    std::vector<ExactSum> sums_;
    ExactSum log_weight_;
    double max_log_weight_ = 0.0;
    std::size_t stride() const { return 4 * static_cast<std::size_t>(N_) * N_ + 3; }
};

EnsembleResult summarize(const std::vector<TrajectoryRecord>& records, Method method, const std::vector<double>& t_grid);

struct EnsembleOptions {
    long n_traj = 1000;
    double dt = 1e-3;
    std::vector<double> t_grid;
    std::uint64_t seed = 0;
    int workers = 1;
    int initial_site = 0;  ///< 0-based
    LinearStep linear = LinearStep::Exponential;
    const PseudoDensityTable* table = nullptr;  ///< required for Method::Exact
};

/// Runs n_traj independent trajectories. Trajectory k draws from RandomStream::for_trajectory(seed, k), so the
/// result is bit-identical for any worker count. A failing trajectory aborts the run; the rethrown error names
/// its index.
EnsembleResult run_ensemble(Method method, const SystemModel& model, const std::vector<AuxBathMap>& maps,
                            const EnsembleOptions& options);

}  // namespace ctwa
