#pragma once

#include <Eigen/Dense>
#include <utility>

#include "covsteer/propagation.hpp"

namespace covsteer {

/// Two-sided existence test for the Riccati flow anchored at (s, Pi_s):
/// N(0, s)^{-1} < Pi_s < N(1, s)^{-1} in the Loewner order, evaluated on
/// symmetrized congruences so no Gramian inverse is ever formed. The gaps
/// are eigenvalue margins of the congruence tests; the bound on the side of
/// an endpoint anchor is vacuous (infinite gap).
struct ExistenceCheck {
    bool feasible;
    double margin;     // min(lower_gap, upper_gap)
    double lower_gap;  // distance from the N(0, s)^{-1} bound
    double upper_gap;  // distance from the N(1, s)^{-1} bound
};
ExistenceCheck existence_condition(const PropagationCache& cache, const Eigen::MatrixXd& pi_s,
                                   double s);

/// Closed-form Riccati solution transported from the anchor (s, Pi_s):
///   Pi(t) = Phi_A(s,t)^T Pi_s (I - N(t,s) Pi_s)^{-1} Phi_A(s,t).
/// Throws FiniteEscapeError (with a bisected escape-time estimate) when the
/// anchor violates the existence condition.
Eigen::MatrixXd pi_at(const PropagationCache& cache, const Eigen::MatrixXd& pi_s, double s,
                      double t);

/// Maximal existence interval of the flow through (s, Pi_s), clipped to the
/// ambient horizon [0, 1]. Escape times are located by bisection to 1e-8.
std::pair<double, double> maximal_interval(const PropagationCache& cache,
                                           const Eigen::MatrixXd& pi_s, double s);

/// Closed-loop transition matrix of A - Bn Bn^T Pi for the flow anchored at
/// Pi(0) = pi0:
///   Phi_cl(t, s) = Phi_A(t, s) (I - N(t, s) Pi(s)).
Eigen::MatrixXd closed_loop_transition(const PropagationCache& cache,
                                       const Eigen::MatrixXd& pi0, double t, double s);

}  // namespace covsteer
