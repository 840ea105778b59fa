#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "covsteer/noise.hpp"
#include "covsteer/schedule.hpp"

namespace covsteer {

/// dx = A(t) x dt + B(t) u dt + C(t) dm(t) on [0, 1], with control weight
/// R(t) > 0 and martingale noise of covariance rate D(t).
class LtvSystem {
  public:
    LtvSystem(MatrixSchedule a, MatrixSchedule b, MatrixSchedule c, NoiseSpec noise,
              MatrixSchedule r);

    Eigen::Index n() const { return n_; }
    Eigen::Index p() const { return p_; }
    Eigen::Index q() const { return q_; }

    const MatrixSchedule& a() const { return a_; }
    const MatrixSchedule& b() const { return b_; }
    const MatrixSchedule& c() const { return c_; }
    const MatrixSchedule& r() const { return r_; }
    const NoiseSpec& noise() const { return noise_; }

    /// C(t) D(t) C(t)^T, the covariance forcing of the state.
    Eigen::MatrixXd noise_kernel(double t) const;

    /// B(t) R(t)^{-1} B(t)^T.
    Eigen::MatrixXd control_kernel(double t) const;

    /// B(t) R(t)^{-1/2}, the control channel after cost normalization.
    Eigen::MatrixXd b_normalized(double t) const;

    /// Compensator drift mapped into the state, C(t) g(t).
    Eigen::VectorXd drift_into_state(double t) const;

  private:
    Eigen::Index n_, p_, q_;
    MatrixSchedule a_, b_, c_, r_;
    NoiseSpec noise_;
};

/// Boundary data of the steering problem.
struct SteeringProblem {
    Eigen::VectorXd mu0;
    Eigen::MatrixXd sigma0;
    Eigen::VectorXd mu1;
    Eigen::MatrixXd sigma1;
};

struct ValidationIssue {
    std::string what;
    double t;  // NaN for issues not tied to a time
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string to_string() const;
};

/// Scans the system on a time grid: R(t) symmetric positive definite
/// (Cholesky), derived D(t) PSD, rates nonnegative. Collects every
/// violation rather than stopping at the first.
ValidationReport validate(const LtvSystem& system, const std::vector<double>& grid);

/// Checks boundary data against the system dimensions and definiteness
/// requirements (Sigma1 > 0; Sigma0 > 0 except the scalar singular path).
ValidationReport validate_problem(const LtvSystem& system, const SteeringProblem& problem);

/// Uniform grid helper, m points spanning [0, 1].
std::vector<double> uniform_grid(std::size_t m);

}  // namespace covsteer
