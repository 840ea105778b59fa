#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "covsteer/controller.hpp"
#include "covsteer/system.hpp"

namespace covsteer::mc {

struct SimulationOptions {
    long n_paths = 100000;
    double dt = 1e-3;          // must be <= 1e-3
    std::uint64_t seed = 0;
    int keep_paths = 10;       // dense state storage for the first paths
    int batches = 20;          // batch-mean groups for standard errors
    int threads = 0;           // 0: hardware concurrency capped by COVSTEER_THREADS
};

struct JumpEvent {
    double time;
    int channel;
    double size;
};

/// Streaming mean/comoment statistics (Welford updates, Chan combination),
/// so moments of large ensembles never require storing every path.
struct MomentStats {
    long count = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd comoment;  // sum of centered outer products

    void init(Eigen::Index n);
    void update(const Eigen::VectorXd& x);
    void combine(const MomentStats& other);
    Eigen::MatrixXd covariance() const;  // divisor count - 1
};

struct ScalarStats {
    long count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void update(double x);
    void combine(const ScalarStats& other);
    double variance() const;
};

/// Monte Carlo ensemble: dense trajectories and jump logs for the first
/// keep_paths paths, per-batch streaming moments at every step for all of
/// them. Batches are contiguous path ranges processed in path order, so
/// results do not depend on the thread count.
class PathEnsemble {
  public:
    long n_paths = 0;
    double dt = 0.0;
    std::vector<double> time_grid;

    std::vector<std::vector<Eigen::VectorXd>> kept_states;  // [path][step]
    std::vector<std::vector<JumpEvent>> kept_jumps;         // [path]
    std::vector<std::uint64_t> seeds;                       // all paths
    std::vector<std::uint32_t> jump_counts;                 // all paths

    // [batch][step]
    std::vector<std::vector<MomentStats>> batch_stats;
    std::vector<ScalarStats> batch_costs;  // pathwise control-energy integrals

    std::size_t step_index(double t) const;
    MomentStats combined(std::size_t step) const;

    /// Batch standard errors need two or more paths in every batch.
    bool batch_errors_available() const;

    Eigen::VectorXd mean_at(double t) const;
    Eigen::MatrixXd covariance_at(double t) const;

    /// Batch-mean standard errors of the empirical mean / covariance entries.
    Eigen::VectorXd mean_standard_error(double t) const;
    Eigen::MatrixXd covariance_standard_error(double t) const;

    double cost_mean() const;
    double cost_standard_error() const;
};

/// Euler-Maruyama simulation of the closed loop, with nonhomogeneous
/// Poisson jump times drawn exactly by thinning against the per-channel
/// rate supremum and applied at their exact times between diffusion steps.
/// Identical (seed, dt, schedule) inputs reproduce the ensemble exactly.
PathEnsemble simulate(const LtvSystem& system, const GainSchedule& schedule,
                      const SteeringProblem& problem, const SimulationOptions& options);

/// Sample mean and centered covariance (divisor n_paths - 1) at a step-grid
/// time.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> empirical_moments(const PathEnsemble& ensemble,
                                                              double t);

/// Integrates Sigma' = (A + B K) Sigma + Sigma (A + B K)^T + C D C^T under
/// the schedule's gains, sampled on out_grid.
std::vector<Eigen::MatrixXd> covariance_ode(const LtvSystem& system,
                                            const GainSchedule& schedule,
                                            const Eigen::MatrixXd& sigma0,
                                            const std::vector<double>& out_grid);

}  // namespace covsteer::mc
