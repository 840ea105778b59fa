#include "covsteer/quadrature.hpp"

#include <cmath>

namespace covsteer::quad {

namespace {

Rule64 build_rule() {
    Rule64 rule;
    constexpr int n = 64;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n(x) = 0.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return rule;
}

}  // namespace

const Rule64& gauss_legendre_64() {
    static const Rule64 rule = build_rule();
    return rule;
}

void composite_nodes(double a, double b, int panels, std::vector<double>& nodes,
                     std::vector<double>& weights) {
    const Rule64& rule = gauss_legendre_64();
    nodes.clear();
    weights.clear();
    nodes.reserve(static_cast<std::size_t>(panels) * 64);
    weights.reserve(static_cast<std::size_t>(panels) * 64);
    for (int k = 0; k < panels; ++k) {
        double pa = a + (b - a) * k / panels;
        double pb = a + (b - a) * (k + 1) / panels;
        double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
        for (int i = 0; i < 64; ++i) {
            nodes.push_back(mid + half * rule.nodes[static_cast<std::size_t>(i)]);
            weights.push_back(half * rule.weights[static_cast<std::size_t>(i)]);
        }
    }
}

Eigen::MatrixXd integrate_matrix(const std::function<Eigen::MatrixXd(double)>& f, double a,
                                 double b, int panels) {
    std::vector<double> nodes, weights;
    composite_nodes(a, b, panels, nodes, weights);
    Eigen::MatrixXd acc = weights[0] * f(nodes[0]);
    for (std::size_t i = 1; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
}

Eigen::MatrixXd integrate_matrix_adaptive(const std::function<Eigen::MatrixXd(double)>& f,
                                          double a, double b, double rel_tol, int max_panels) {
    Eigen::MatrixXd prev = integrate_matrix(f, a, b, 1);
    for (int panels = 2; panels <= max_panels; panels *= 2) {
        Eigen::MatrixXd next = integrate_matrix(f, a, b, panels);
        if ((next - prev).norm() <= rel_tol * std::max(1.0, next.norm())) return next;
        prev = std::move(next);
    }
    return prev;
}

double integrate(const std::function<double(double)>& f, double a, double b, int panels) {
    return integrate_matrix(
               [&f](double t) { return Eigen::MatrixXd::Constant(1, 1, f(t)); }, a, b, panels)(0,
                                                                                               0);
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, int max_panels) {
    return integrate_matrix_adaptive(
        [&f](double t) { return Eigen::MatrixXd::Constant(1, 1, f(t)); }, a, b, rel_tol,
        max_panels)(0, 0);
}

}  // namespace covsteer::quad
