#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "covsteer/steering.hpp"
#include "covsteer/system.hpp"

namespace covsteer {

/// The synthesized control law u(t) = K(t) x + nu(t): feedback gains
/// K(t) = -R^{-1} B^T Pi(t) and total feedforward sampled on a dense
/// uniform grid with piecewise-linear interpolation. When available, the
/// exact evaluators (closed-form Pi behind them) are carried along so
/// integrators are not limited by interpolation error.
struct GainSchedule {
    std::vector<double> grid;
    std::vector<Eigen::MatrixXd> gains;        // p x n per grid point
    std::vector<Eigen::VectorXd> feedforward;  // p per grid point

    std::function<Eigen::MatrixXd(double)> exact_gain;
    std::function<Eigen::VectorXd(double)> exact_feedforward;

    Eigen::MatrixXd gain_at(double t) const;
    Eigen::VectorXd feedforward_at(double t) const;

    Eigen::MatrixXd dense_gain(double t) const;
    Eigen::VectorXd dense_feedforward(double t) const;
};

/// Minimum-energy feedforward through the closed loop: the returned nu
/// steers the mean of
///   mu' = (A - B R^{-1} B^T Pi) mu + B nu + C g
/// from mu0 to mu1 exactly while minimizing the integral of nu^T R nu.
std::function<Eigen::VectorXd(double)> mean_feedforward(const PropagationCache& cache,
                                                        const Eigen::MatrixXd& pi0,
                                                        const Eigen::VectorXd& mu0,
                                                        const Eigen::VectorXd& mu1);

struct SynthesisResult {
    GainSchedule schedule;
    Eigen::MatrixXd pi0;
    SolverTrace trace;
};

/// Full law synthesis: solves for Pi(0) (Newton for n > 1, monotone
/// bisection for n = 1), samples gains on the grid, and attaches the
/// mean-steering feedforward with the compensator drift folded in.
SynthesisResult synthesize(const LtvSystem& system, const SteeringProblem& problem,
                           const SolverOptions& options = {}, std::size_t grid_points = 1001);

/// Mean trajectory under the schedule, mu' = A mu + B (K mu + nu) + C g,
/// returned on the schedule grid.
std::vector<Eigen::VectorXd> mean_trajectory(const LtvSystem& system,
                                             const GainSchedule& schedule,
                                             const Eigen::VectorXd& mu0);

/// Expected control cost J = integral of tr(R K Sigma K^T) + (K mu + nu)^T
/// R (K mu + nu), by Simpson quadrature on the schedule grid. The moment
/// trajectories must be sampled on that same grid.
double expected_cost(const LtvSystem& system, const GainSchedule& schedule,
                     const std::vector<Eigen::MatrixXd>& sigma_traj,
                     const std::vector<Eigen::VectorXd>& mu_traj);

}  // namespace covsteer
