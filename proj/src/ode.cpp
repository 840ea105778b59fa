#include "covsteer/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covsteer/errors.hpp"

namespace covsteer::ode {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// e = b - bhat, for direct error estimation.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output weights (Hairer, Norsett & Wanner).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, double abs_tol, double rel_tol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        double scale = abs_tol + rel_tol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        double r = err(i) / scale;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace

Eigen::VectorXd DenseSolution::eval(double t) const {
    // clamp to the integration window; callers stay inside it by contract
    if (forward_) {
        t = std::clamp(t, t_begin_, t_end_);
    } else {
        t = std::clamp(t, t_end_, t_begin_);
    }
    // binary search for the step containing t
    std::size_t lo = 0, hi = steps_.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        double step_end = steps_[mid].t0 + steps_[mid].h;
        bool before = forward_ ? (t <= step_end) : (t >= step_end);
        if (before)
            hi = mid;
        else
            lo = mid + 1;
    }
    const Step& s = steps_[lo];
    double theta = (t - s.t0) / s.h;
    double theta1 = 1.0 - theta;
    return s.r1 + theta * (s.r2 + theta1 * (s.r3 + theta * (s.r4 + theta1 * s.r5)));
}

DenseSolution integrate(const Rhs& f, double t0, double t1, Eigen::VectorXd y0,
                        const Options& options) {
    DenseSolution sol;
    sol.t_begin_ = t0;
    sol.t_end_ = t1;
    sol.forward_ = t1 >= t0;
    if (t0 == t1) {
        sol.final_state_ = y0;
        DenseSolution::Step s;
        s.t0 = t0;
        s.h = 1.0;
        s.r1 = y0;
        s.r2 = s.r3 = s.r4 = s.r5 = Eigen::VectorXd::Zero(y0.size());
        sol.steps_.push_back(std::move(s));
        return sol;
    }

    const double dir = sol.forward_ ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    double h = options.initial_step > 0.0 ? options.initial_step : span / 100.0;
    h = std::min(h, span);

    double t = t0;
    Eigen::VectorXd y = std::move(y0);
    Eigen::VectorXd k1 = f(t, y);

    for (long step = 0; step < options.max_steps; ++step) {
        if (std::abs(t - t1) <= 0.0) break;
        h = std::min(h, std::abs(t1 - t));
        const double hs = dir * h;

        Eigen::VectorXd k2 = f(t + c2 * hs, y + hs * (a21 * k1));
        Eigen::VectorXd k3 = f(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
        Eigen::VectorXd k4 = f(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
        Eigen::VectorXd k5 =
            f(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Eigen::VectorXd k6 =
            f(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Eigen::VectorXd y1 = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        Eigen::VectorXd k7 = f(t + hs, y1);  // FSAL

        Eigen::VectorXd err =
            hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err_norm = error_norm(err, y, y1, options.abs_tol, options.rel_tol);

        if (err_norm <= 1.0) {
            DenseSolution::Step s;
            s.t0 = t;
            s.h = hs;
            s.r1 = y;
            s.r2 = y1 - y;
            s.r3 = hs * k1 - s.r2;
            s.r4 = s.r2 - hs * k7 - s.r3;
            s.r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            sol.steps_.push_back(std::move(s));
            t += hs;
            y = std::move(y1);
            k1 = std::move(k7);
            if (std::abs(t - t1) <= 1e-14 * span) {
                sol.final_state_ = y;
                sol.t_end_ = t1;
                return sol;
            }
        }
        double factor = 0.9 * std::pow(std::max(err_norm, 1e-10), -0.2);
        h *= std::clamp(factor, 0.2, 5.0);
        if (h < 1e-14 * span)
            throw NumericalError("ode integration stalled at t = " + std::to_string(t) +
                                 " (step size underflow after " +
                                 std::to_string(sol.steps_.size()) + " accepted steps)");
    }
    throw NumericalError("ode integration exceeded the step budget");
}

}  // namespace covsteer::ode
