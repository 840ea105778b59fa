#include "covsteer/riccati.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"

namespace covsteer {

namespace {

constexpr double kEscapeBisectionTol = 1e-8;
constexpr double kAsymmetryBudget = 1e-9;

// Largest eigenvalue of N(t,s)^{1/2} Pi N(t,s)^{1/2} for t > s; crossing 1
// marks the forward escape.
double forward_indicator(const PropagationCache& cache, const Eigen::MatrixXd& pi_s, double s,
                         double t) {
    return linalg::max_eigenvalue(linalg::congruence(cache.gramian(t, s), pi_s));
}

// Smallest eigenvalue of (-N(t,s))^{1/2} Pi (-N(t,s))^{1/2} for t < s;
// crossing -1 marks the backward escape.
double backward_indicator(const PropagationCache& cache, const Eigen::MatrixXd& pi_s, double s,
                          double t) {
    return linalg::min_eigenvalue(linalg::congruence(-cache.gramian(t, s), pi_s));
}

}  // namespace

ExistenceCheck existence_condition(const PropagationCache& cache, const Eigen::MatrixXd& pi_s,
                                   double s) {
    const double inf = std::numeric_limits<double>::infinity();
    ExistenceCheck check;
    check.upper_gap = s < 1.0 ? 1.0 - forward_indicator(cache, pi_s, s, 1.0) : inf;
    check.lower_gap = s > 0.0 ? 1.0 + backward_indicator(cache, pi_s, s, 0.0) : inf;
    check.margin = std::min(check.lower_gap, check.upper_gap);
    check.feasible = check.margin > 0.0;
    return check;
}

std::pair<double, double> maximal_interval(const PropagationCache& cache,
                                           const Eigen::MatrixXd& pi_s, double s) {
    double t1 = 1.0;
    if (s < 1.0 && forward_indicator(cache, pi_s, s, 1.0) >= 1.0) {
        double lo = s, hi = 1.0;  // indicator < 1 at lo, >= 1 at hi
        while (hi - lo > kEscapeBisectionTol) {
            double mid = 0.5 * (lo + hi);
            (forward_indicator(cache, pi_s, s, mid) < 1.0 ? lo : hi) = mid;
        }
        t1 = 0.5 * (lo + hi);
    }
    double t0 = 0.0;
    if (s > 0.0 && backward_indicator(cache, pi_s, s, 0.0) <= -1.0) {
        double lo = 0.0, hi = s;  // indicator <= -1 at lo, > -1 at hi
        while (hi - lo > kEscapeBisectionTol) {
            double mid = 0.5 * (lo + hi);
            (backward_indicator(cache, pi_s, s, mid) > -1.0 ? hi : lo) = mid;
        }
        t0 = 0.5 * (lo + hi);
    }
    return {t0, t1};
}

Eigen::MatrixXd pi_at(const PropagationCache& cache, const Eigen::MatrixXd& pi_s, double s,
                      double t) {
    const Eigen::Index n = cache.dim();
    if (pi_s.rows() != n || pi_s.cols() != n)
        throw DimensionError("Riccati anchor must be n x n");
    ExistenceCheck check = existence_condition(cache, pi_s, s);
    if (!check.feasible) {
        auto [t0, t1] = maximal_interval(cache, pi_s, s);
        double escape = check.upper_gap <= 0.0 ? t1 : t0;
        throw FiniteEscapeError(
            "Riccati flow from the given anchor escapes inside the horizon near t = " +
                std::to_string(escape),
            escape);
    }
    Eigen::MatrixXd phi_st = cache.transition(s, t);
    Eigen::MatrixXd core =
        (Eigen::MatrixXd::Identity(n, n) - cache.gramian(t, s) * pi_s).lu().solve(
            Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd pi_t = phi_st.transpose() * pi_s * core * phi_st;
    if (linalg::asymmetry(pi_t) > kAsymmetryBudget)
        throw NumericalError("Riccati evaluation lost symmetry beyond budget at t = " +
                             std::to_string(t));
    return linalg::symmetrize(pi_t);
}

Eigen::MatrixXd closed_loop_transition(const PropagationCache& cache,
                                       const Eigen::MatrixXd& pi0, double t, double s) {
    const Eigen::Index n = cache.dim();
    Eigen::MatrixXd pi_at_s = pi_at(cache, pi0, 0.0, s);
    return cache.transition(t, s) *
           (Eigen::MatrixXd::Identity(n, n) - cache.gramian(t, s) * pi_at_s);
}

}  // namespace covsteer
