#include "covsteer/controller.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"
#include "covsteer/ode.hpp"
#include "covsteer/quadrature.hpp"
#include "covsteer/riccati.hpp"

namespace covsteer {

namespace {

std::size_t locate_segment(const std::vector<double>& grid, double t) {
    if (t <= grid.front()) return 0;
    if (t >= grid.back()) return grid.size() - 2;
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    return static_cast<std::size_t>(it - grid.begin()) - 1;
}

}  // namespace

Eigen::MatrixXd GainSchedule::gain_at(double t) const {
    std::size_t k = locate_segment(grid, t);
    double w = (t - grid[k]) / (grid[k + 1] - grid[k]);
    w = std::clamp(w, 0.0, 1.0);
    return (1.0 - w) * gains[k] + w * gains[k + 1];
}

Eigen::VectorXd GainSchedule::feedforward_at(double t) const {
    std::size_t k = locate_segment(grid, t);
    double w = (t - grid[k]) / (grid[k + 1] - grid[k]);
    w = std::clamp(w, 0.0, 1.0);
    return (1.0 - w) * feedforward[k] + w * feedforward[k + 1];
}

Eigen::MatrixXd GainSchedule::dense_gain(double t) const {
    return exact_gain ? exact_gain(t) : gain_at(t);
}

Eigen::VectorXd GainSchedule::dense_feedforward(double t) const {
    return exact_feedforward ? exact_feedforward(t) : feedforward_at(t);
}

std::function<Eigen::VectorXd(double)> mean_feedforward(const PropagationCache& cache,
                                                        const Eigen::MatrixXd& pi0,
                                                        const Eigen::VectorXd& mu0,
                                                        const Eigen::VectorXd& mu1) {
    const Eigen::Index n = cache.dim();
    const LtvSystem& sys = cache.system();
    if (mu0.size() != n || mu1.size() != n)
        throw DimensionError("mean vectors must have length n");

    // Psi(1, t) = Phi_cl(1, 0) Phi_cl(t, 0)^{-1}; sampling through the
    // cached closed-loop factors keeps every evaluation cheap.
    auto cache_ptr = &cache;
    Eigen::MatrixXd pi0_copy = pi0;
    auto psi_1t = [cache_ptr, pi0_copy](double t) -> Eigen::MatrixXd {
        const Eigen::Index nn = cache_ptr->dim();
        Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(nn, nn);
        Eigen::MatrixXd cl_10 =
            cache_ptr->phi(1.0) * (identity - cache_ptr->gramian_base(1.0) * pi0_copy);
        Eigen::MatrixXd cl_t0 =
            cache_ptr->phi(t) * (identity - cache_ptr->gramian_base(t) * pi0_copy);
        return cl_10 * cl_t0.lu().solve(identity);
    };

    // Closed-loop input Gramian and the drift's contribution to the mean.
    Eigen::MatrixXd gramian = quad::integrate_matrix_adaptive(
        [&](double s) -> Eigen::MatrixXd {
            Eigen::MatrixXd psi_b = psi_1t(s) * sys.b_normalized(s);
            return psi_b * psi_b.transpose();
        },
        0.0, 1.0, 1e-12, 32);
    Eigen::MatrixXd drift = quad::integrate_matrix_adaptive(
        [&](double s) -> Eigen::MatrixXd { return psi_1t(s) * sys.drift_into_state(s); }, 0.0,
        1.0, 1e-12, 32);

    Eigen::LDLT<Eigen::MatrixXd> gram_solver(linalg::symmetrize(gramian));
    if (gram_solver.info() != Eigen::Success || !gram_solver.isPositive())
        throw NumericalError(
            "closed-loop input Gramian is singular; the pair is not totally controllable");
    Eigen::VectorXd costate = gram_solver.solve(mu1 - psi_1t(0.0) * mu0 - drift);

    const LtvSystem* sys_ptr = &sys;
    return [psi_1t, costate, sys_ptr](double t) -> Eigen::VectorXd {
        Eigen::MatrixXd r = sys_ptr->r().value(t);
        Eigen::MatrixXd rinv_bt = r.ldlt().solve(sys_ptr->b().value(t).transpose());
        return rinv_bt * psi_1t(t).transpose() * costate;
    };
}

SynthesisResult synthesize(const LtvSystem& system, const SteeringProblem& problem,
                           const SolverOptions& options, std::size_t grid_points) {
    if (grid_points < 2) throw ValidationError("gain schedule needs at least two grid points");
    auto cache = std::make_shared<PropagationCache>(system);

    Eigen::MatrixXd pi0;
    SolverTrace trace;
    if (system.n() == 1) {
        double pi0_scalar =
            solve_pi0_scalar(*cache, problem.sigma0(0, 0), problem.sigma1(0, 0),
                             options.tolerance);
        pi0 = Eigen::MatrixXd::Constant(1, 1, pi0_scalar);
        BoundaryMap map(*cache, problem.sigma0);
        trace.converged = true;
        trace.jacobian_condition = 1.0;
        trace.iterates.push_back({pi0, (map.evaluate(pi0) - problem.sigma1).norm(), 1.0});
    } else {
        Pi0Solution solution = solve_pi0(*cache, problem, options);
        pi0 = solution.pi0;
        trace = std::move(solution.trace);
    }

    Eigen::MatrixXd pi0_copy = pi0;
    auto gain_of = [cache, pi0_copy](double t) -> Eigen::MatrixXd {
        Eigen::MatrixXd pi_t = pi_at(*cache, pi0_copy, 0.0, t);
        const LtvSystem& sys = cache->system();
        Eigen::MatrixXd r = sys.r().value(t);
        return -r.ldlt().solve(sys.b().value(t).transpose() * pi_t);
    };
    auto nu_of = mean_feedforward(*cache, pi0, problem.mu0, problem.mu1);

    GainSchedule schedule;
    schedule.grid = uniform_grid(grid_points);
    schedule.gains.reserve(grid_points);
    schedule.feedforward.reserve(grid_points);
    for (double t : schedule.grid) {
        schedule.gains.push_back(gain_of(t));
        schedule.feedforward.push_back(nu_of(t));
    }
    schedule.exact_gain = gain_of;
    // keep the cache alive through the feedforward closure as well
    schedule.exact_feedforward = [cache, nu_of](double t) { return nu_of(t); };
    return {std::move(schedule), std::move(pi0), std::move(trace)};
}

std::vector<Eigen::VectorXd> mean_trajectory(const LtvSystem& system,
                                             const GainSchedule& schedule,
                                             const Eigen::VectorXd& mu0) {
    auto rhs = [&](double t, const Eigen::VectorXd& mu) -> Eigen::VectorXd {
        Eigen::VectorXd u = schedule.dense_gain(t) * mu + schedule.dense_feedforward(t);
        return system.a().value(t) * mu + system.b().value(t) * u +
               system.drift_into_state(t);
    };
    ode::DenseSolution sol = ode::integrate(rhs, 0.0, 1.0, mu0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(schedule.grid.size());
    for (double t : schedule.grid) out.push_back(sol.eval(t));
    return out;
}

double expected_cost(const LtvSystem& system, const GainSchedule& schedule,
                     const std::vector<Eigen::MatrixXd>& sigma_traj,
                     const std::vector<Eigen::VectorXd>& mu_traj) {
    const std::size_t m = schedule.grid.size();
    if (sigma_traj.size() != m || mu_traj.size() != m)
        throw ValidationError("moment trajectories must be sampled on the schedule grid");
    std::vector<double> integrand(m);
    for (std::size_t k = 0; k < m; ++k) {
        double t = schedule.grid[k];
        Eigen::MatrixXd r = system.r().value(t);
        const Eigen::MatrixXd& gain = schedule.gains[k];
        Eigen::VectorXd mean_input = gain * mu_traj[k] + schedule.feedforward[k];
        integrand[k] = (r * gain * sigma_traj[k] * gain.transpose()).trace() +
                       mean_input.dot(r * mean_input);
    }
    // Composite Simpson; trapezoid on the final interval when the count is
    // even.
    double acc = 0.0;
    std::size_t k = 0;
    while (k + 2 < m) {
        double h1 = schedule.grid[k + 1] - schedule.grid[k];
        double h2 = schedule.grid[k + 2] - schedule.grid[k + 1];
        acc += (h1 + h2) / 6.0 *
               (integrand[k] + 4.0 * integrand[k + 1] + integrand[k + 2]);
        k += 2;
    }
    if (k + 1 < m)
        acc += 0.5 * (schedule.grid[k + 1] - schedule.grid[k]) *
               (integrand[k] + integrand[k + 1]);
    return acc;
}

}  // namespace covsteer
