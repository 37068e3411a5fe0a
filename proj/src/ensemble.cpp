#include "ctwa/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace ctwa {

EnsembleAccumulator::EnsembleAccumulator(int n_sites, std::size_t n_times)
    : N_(n_sites), n_times_(n_times), sums_(n_times * stride()) {}

void EnsembleAccumulator::add(const TrajectoryRecord& rec) {
    if (rec.obs.size() != n_times_) throw NumericalError("trajectory record has the wrong number of times");
    const std::size_t S = stride();
    for (std::size_t i = 0; i < n_times_; ++i) {
        ExactSum* s = &sums_[i * S];
        const CMatrix& o = rec.obs[i];
        std::size_t c = 0;
        for (int a = 0; a < N_; ++a)
            for (int b = 0; b < N_; ++b) {
                const double re = o(a, b).real(), im = o(a, b).imag();
                s[c++].add(re);
                s[c++].add(re * re);
                s[c++].add(im);
                s[c++].add(im * im);
            }
        const double w = rec.weight[i];
        s[c++].add(rec.sign[i]);
        s[c++].add(std::abs(w));
        s[c++].add(w * w);
    }
    log_weight_.add(rec.log_weight);
    max_log_weight_ = std::max(max_log_weight_, rec.log_weight);
    ++n_;
}

void EnsembleAccumulator::merge(const EnsembleAccumulator& other) {
    for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i].merge(other.sums_[i]);
    log_weight_.merge(other.log_weight_);
    max_log_weight_ = std::max(max_log_weight_, other.max_log_weight_);
    n_ += other.n_;
}

EnsembleResult EnsembleAccumulator::finish(Method method, const std::vector<double>& t_grid) const {
    EnsembleResult res;
    res.method = method;
    res.n_traj = n_;
    const double n = static_cast<double>(n_);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto se_of = [&](double s1, double s2) {
        if (n_ < 2) return nan;
        const double var = std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0));
        return std::sqrt(var / n);
    };
    const std::size_t S = stride();
    for (std::size_t i = 0; i < n_times_; ++i) {
        const ExactSum* s = &sums_[i * S];
        WeightedEstimate e;
        e.t = t_grid[i];
        e.n_traj = n_;
        e.mean.resize(N_, N_);
        e.se_re.resize(N_, N_);
        e.se_im.resize(N_, N_);
        e.se.resize(N_, N_);
        std::size_t c = 0;
        for (int a = 0; a < N_; ++a)
            for (int b = 0; b < N_; ++b) {
                const double r1 = s[c++].value(), r2 = s[c++].value();
                const double i1 = s[c++].value(), i2 = s[c++].value();
                e.mean(a, b) = Complex(r1 / n, i1 / n);
                e.se_re(a, b) = se_of(r1, r2);
                e.se_im(a, b) = se_of(i1, i2);
                e.se(a, b) = std::hypot(e.se_re(a, b), e.se_im(a, b));
            }
        e.avg_sign = s[c++].value() / n;
        const double sum_abs = s[c++].value();
        const double sum_sq = s[c++].value();
        e.ess = sum_sq > 0.0 ? sum_abs * sum_abs / sum_sq : 0.0;
        res.points.push_back(std::move(e));
    }
    res.mean_log_weight = n_ > 0 ? log_weight_.value() / n : 0.0;
    res.max_log_weight = max_log_weight_;
    return res;
}

EnsembleResult summarize(const std::vector<TrajectoryRecord>& records, Method method,
                         const std::vector<double>& t_grid) {
    if (records.empty()) throw ConfigError("summarize needs at least one record");
    EnsembleAccumulator acc(static_cast<int>(records.front().obs.front().rows()), t_grid.size());
    for (const auto& r : records) acc.add(r);
    return acc.finish(method, t_grid);
}

namespace {

[[noreturn]] void rethrow_with_index(std::exception_ptr p, long index) {
    const std::string prefix = "trajectory " + std::to_string(index) + ": ";
    try {
        std::rethrow_exception(p);
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(prefix + e.what());
    }
}

}  // namespace

EnsembleResult run_ensemble(Method method, const SystemModel& model, const std::vector<AuxBathMap>& maps,
                            const EnsembleOptions& opt) {
    model.validate();
    if (opt.n_traj < 1) throw ConfigError("n_traj must be >= 1");
    if (opt.workers < 1) throw ConfigError("workers must be >= 1");
    if (opt.t_grid.empty()) throw ConfigError("empty time grid");
    if (method == Method::Exact && opt.table == nullptr) throw ConfigError("exact scheme needs a pseudo-density table");
    const auto steps = grid_steps(opt.t_grid, opt.dt);
    const LocalizedSampler sampler(model.n_sites(), opt.initial_site);
    const int workers = static_cast<int>(std::min<long>(opt.workers, opt.n_traj));

    std::vector<EnsembleAccumulator> acc(workers, EnsembleAccumulator(model.n_sites(), steps.size()));
    std::atomic<long> next{0};
    std::atomic<bool> abort{false};
    std::mutex err_mutex;
    std::exception_ptr err;
    long err_index = std::numeric_limits<long>::max();

    auto work = [&](int w) {
        Stepper stepper(model, maps, opt.dt, opt.linear);
        for (;;) {
            if (abort.load(std::memory_order_relaxed)) return;
            const long k = next.fetch_add(1);
            if (k >= opt.n_traj) return;
            try {
                RandomStream rng = RandomStream::for_trajectory(opt.seed, static_cast<std::uint64_t>(k));
                const WignerSample sample = sampler.sample(rng);
                const TrajectoryRecord rec = method == Method::Exact
                                                 ? run_exact(stepper, *opt.table, sample, steps, rng)
                                                 : run_trajectory(method, stepper, sample, steps, rng);
                acc[w].add(rec);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (k < err_index) {
                    err_index = k;
                    err = std::current_exception();
                }
                abort = true;
                return;
            }
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }
    if (err) rethrow_with_index(err, err_index);
    for (int w = 1; w < workers; ++w) acc[0].merge(acc[w]);
    return acc[0].finish(method, opt.t_grid);
}

}  // namespace ctwa
