#include "covsteer/system.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"

namespace covsteer {

LtvSystem::LtvSystem(MatrixSchedule a, MatrixSchedule b, MatrixSchedule c, NoiseSpec noise,
                     MatrixSchedule r)
    : n_(a.rows()),
      p_(b.cols()),
      q_(c.cols()),
      a_(std::move(a)),
      b_(std::move(b)),
      c_(std::move(c)),
      r_(std::move(r)),
      noise_(std::move(noise)) {
    if (a_.rows() != a_.cols()) throw DimensionError("A must be square");
    if (b_.rows() != n_) throw DimensionError("B must have n rows");
    if (c_.rows() != n_) throw DimensionError("C must have n rows");
    if (r_.rows() != p_ || r_.cols() != p_) throw DimensionError("R must be p x p");
    if (noise_.channels() != q_)
        throw DimensionError("noise channel count " + std::to_string(noise_.channels()) +
                             " does not match C column count " + std::to_string(q_));
}

Eigen::MatrixXd LtvSystem::noise_kernel(double t) const {
    Eigen::MatrixXd c = c_.value(t);
    return c * effective_intensity(noise_, t) * c.transpose();
}

Eigen::MatrixXd LtvSystem::control_kernel(double t) const {
    Eigen::MatrixXd bn = b_normalized(t);
    return bn * bn.transpose();
}

Eigen::MatrixXd LtvSystem::b_normalized(double t) const {
    return b_.value(t) * linalg::inv_sqrt_spd(r_.value(t));
}

Eigen::VectorXd LtvSystem::drift_into_state(double t) const {
    return c_.value(t) * compensator_drift(noise_, t);
}

std::string ValidationReport::to_string() const {
    if (ok()) return "valid";
    std::ostringstream os;
    for (const auto& issue : issues) {
        os << "- " << issue.what;
        if (std::isfinite(issue.t)) os << " (t = " << issue.t << ")";
        os << "\n";
    }
    return os.str();
}

ValidationReport validate(const LtvSystem& system, const std::vector<double>& grid) {
    ValidationReport report;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (grid.empty()) {
        report.issues.push_back({"empty validation grid", nan});
        return report;
    }
    for (double t : grid) {
        if (t < 0.0 || t > 1.0) {
            report.issues.push_back({"grid point outside [0, 1]", t});
            continue;
        }
        Eigen::MatrixXd r = system.r().value(t);
        if (linalg::asymmetry(r) > 1e-12)
            report.issues.push_back({"R(t) is not symmetric", t});
        else if (!linalg::is_positive_definite(r))
            report.issues.push_back({"R(t) is not positive definite", t});
        try {
            Eigen::MatrixXd d = effective_intensity(system.noise(), t);
            if (linalg::min_eigenvalue(d) < -1e-12)
                report.issues.push_back({"derived D(t) is not positive semidefinite", t});
        } catch (const ValidationError& e) {
            report.issues.push_back({e.what(), t});
        }
        if (!system.a().value(t).allFinite())
            report.issues.push_back({"A(t) has non-finite entries", t});
        if (!system.b().value(t).allFinite())
            report.issues.push_back({"B(t) has non-finite entries", t});
        if (!system.c().value(t).allFinite())
            report.issues.push_back({"C(t) has non-finite entries", t});
    }
    return report;
}

ValidationReport validate_problem(const LtvSystem& system, const SteeringProblem& problem) {
    ValidationReport report;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const Eigen::Index n = system.n();
    if (problem.mu0.size() != n || problem.mu1.size() != n)
        report.issues.push_back({"mean vectors must have length n", nan});
    if (problem.sigma0.rows() != n || problem.sigma0.cols() != n ||
        problem.sigma1.rows() != n || problem.sigma1.cols() != n) {
        report.issues.push_back({"covariance matrices must be n x n", nan});
        return report;
    }
    if (linalg::asymmetry(problem.sigma0) > 1e-10)
        report.issues.push_back({"Sigma0 is not symmetric", nan});
    if (linalg::asymmetry(problem.sigma1) > 1e-10)
        report.issues.push_back({"Sigma1 is not symmetric", nan});
    if (!linalg::is_positive_definite(problem.sigma1))
        report.issues.push_back({"Sigma1 must be positive definite", nan});
    double sigma0_min = linalg::min_eigenvalue(problem.sigma0);
    if (sigma0_min < -1e-12)
        report.issues.push_back({"Sigma0 must be positive semidefinite", nan});
    else if (n > 1 && sigma0_min <= 0.0)
        report.issues.push_back(
            {"singular initial covariance is supported only for scalar systems (n = 1)", nan});
    return report;
}

std::vector<double> uniform_grid(std::size_t m) {
    std::vector<double> grid(m);
    for (std::size_t k = 0; k < m; ++k)
        grid[k] = static_cast<double>(k) / static_cast<double>(m - 1);
    return grid;
}

}  // namespace covsteer
