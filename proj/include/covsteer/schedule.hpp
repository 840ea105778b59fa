#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

namespace covsteer {

/// A time-varying matrix-valued function on [0, 1].
///
/// Four representations are supported: constant, per-entry polynomial in t,
/// piecewise-constant on a breakpoint grid, and tabulated with linear
/// interpolation. Constant and polynomial schedules carry exact derivatives
/// of any order; piecewise-constant schedules differentiate to zero inside
/// each piece; tabulated schedules fall back to central finite differences
/// with step 1e-5 and support derivative orders up to 2.
class MatrixSchedule {
  public:
    enum class Form { Constant, Polynomial, PiecewiseConstant, Tabulated };

    static MatrixSchedule constant(Eigen::MatrixXd value);

    /// coeffs[i][j] holds the polynomial coefficients of entry (i, j),
    /// lowest degree first.
    static MatrixSchedule polynomial(Eigen::Index rows, Eigen::Index cols,
                                     std::vector<std::vector<std::vector<double>>> coeffs);

    /// 1x1 polynomial convenience.
    static MatrixSchedule scalar_polynomial(std::vector<double> coeffs);

    /// Right-continuous steps: value(t) = values[k] for t in
    /// [breaks[k], breaks[k+1]). breaks must start at 0 and be increasing.
    static MatrixSchedule piecewise_constant(std::vector<double> breaks,
                                             std::vector<Eigen::MatrixXd> values);

    /// Linear interpolation through (times[k], values[k]); clamped outside
    /// the tabulated range.
    static MatrixSchedule tabulated(std::vector<double> times,
                                    std::vector<Eigen::MatrixXd> values);

    Eigen::MatrixXd value(double t) const;

    /// order = 0 returns value(t). Throws DerivativeOrderError when the
    /// requested order exceeds max_derivative_order().
    Eigen::MatrixXd derivative(double t, int order) const;

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    Form form() const { return form_; }

    /// Number of exact analytic derivatives available (unbounded for
    /// constant, polynomial and piecewise-constant forms; 0 for tables).
    int analytic_derivative_order() const;

    /// Highest derivative order evaluable at all, analytic or by the
    /// finite-difference fallback.
    int max_derivative_order() const;

    static constexpr int kUnboundedOrder = std::numeric_limits<int>::max();
    static constexpr int kMaxTableDerivative = 2;
    static constexpr double kFiniteDifferenceStep = 1e-5;

    // Representation accessors used by the scenario round-trip.
    const Eigen::MatrixXd& constant_value() const { return constant_; }
    const std::vector<std::vector<std::vector<double>>>& poly_coeffs() const { return coeffs_; }
    const std::vector<double>& grid_times() const { return times_; }
    const std::vector<Eigen::MatrixXd>& grid_values() const { return values_; }

  private:
    MatrixSchedule(Form form, Eigen::Index rows, Eigen::Index cols)
        : form_(form), rows_(rows), cols_(cols) {}

    Eigen::MatrixXd interpolate(double t) const;

    Form form_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    Eigen::MatrixXd constant_;
    std::vector<std::vector<std::vector<double>>> coeffs_;  // [i][j][degree]
    std::vector<double> times_;                             // breaks or table abscissae
    std::vector<Eigen::MatrixXd> values_;
};

}  // namespace covsteer
