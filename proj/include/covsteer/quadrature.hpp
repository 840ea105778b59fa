#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace covsteer::quad {

/// 64-point Gauss-Legendre rule on [-1, 1]; nodes/weights are computed once
/// by Newton iteration on the Legendre recurrence.
struct Rule64 {
    std::array<double, 64> nodes;
    std::array<double, 64> weights;
};
const Rule64& gauss_legendre_64();

/// Nodes and weights of the composite rule with `panels` equal panels of
/// the 64-point rule mapped onto [a, b].
void composite_nodes(double a, double b, int panels, std::vector<double>& nodes,
                     std::vector<double>& weights);

Eigen::MatrixXd integrate_matrix(const std::function<Eigen::MatrixXd(double)>& f, double a,
                                 double b, int panels = 1);

/// Doubles the panel count until two successive composite values agree to
/// rel_tol in Frobenius norm.
Eigen::MatrixXd integrate_matrix_adaptive(const std::function<Eigen::MatrixXd(double)>& f,
                                          double a, double b, double rel_tol = 1e-10,
                                          int max_panels = 32);

double integrate(const std::function<double(double)>& f, double a, double b, int panels = 1);
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-10, int max_panels = 32);

}  // namespace covsteer::quad
