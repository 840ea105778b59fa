#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace covsteer::ode {

using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

struct Options {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double initial_step = 0.0;  // 0 picks a heuristic
    long max_steps = 2'000'000;
};

/// Continuous extension of an adaptive Dormand-Prince 5(4) run: per accepted
/// step the quartic interpolant coefficients are retained, so the solution
/// can be evaluated anywhere in [t_begin, t_end] at the accuracy of the
/// integration itself.
class DenseSolution {
  public:
    Eigen::VectorXd eval(double t) const;
    double t_begin() const { return t_begin_; }
    double t_end() const { return t_end_; }
    const Eigen::VectorXd& final_state() const { return final_state_; }
    std::size_t step_count() const { return steps_.size(); }

  private:
    friend DenseSolution integrate(const Rhs&, double, double, Eigen::VectorXd,
                                   const Options&);
    struct Step {
        double t0;
        double h;  // signed
        Eigen::VectorXd r1, r2, r3, r4, r5;
    };
    std::vector<Step> steps_;
    double t_begin_ = 0.0, t_end_ = 0.0;
    bool forward_ = true;
    Eigen::VectorXd final_state_;
};

/// Integrates y' = f(t, y) from t0 to t1 (either direction). Throws
/// NumericalError when step-size control collapses or the step budget is
/// exhausted.
DenseSolution integrate(const Rhs& f, double t0, double t1, Eigen::VectorXd y0,
                        const Options& options = {});

}  // namespace covsteer::ode
