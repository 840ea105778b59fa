#include "covsteer/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "covsteer/errors.hpp"

namespace covsteer {

MatrixSchedule MatrixSchedule::constant(Eigen::MatrixXd value) {
    MatrixSchedule s(Form::Constant, value.rows(), value.cols());
    if (!value.allFinite())
        throw ValidationError("constant schedule has non-finite entries");
    s.constant_ = std::move(value);
    return s;
}

MatrixSchedule MatrixSchedule::polynomial(Eigen::Index rows, Eigen::Index cols,
                                          std::vector<std::vector<std::vector<double>>> coeffs) {
    MatrixSchedule s(Form::Polynomial, rows, cols);
    if (static_cast<Eigen::Index>(coeffs.size()) != rows)
        throw DimensionError("polynomial schedule: row count mismatch");
    for (const auto& row : coeffs) {
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw DimensionError("polynomial schedule: column count mismatch");
        for (const auto& entry : row)
            for (double c : entry)
                if (!std::isfinite(c))
                    throw ValidationError("polynomial schedule has non-finite coefficients");
    }
    s.coeffs_ = std::move(coeffs);
    return s;
}

MatrixSchedule MatrixSchedule::scalar_polynomial(std::vector<double> coeffs) {
    return polynomial(1, 1, {{std::move(coeffs)}});
}

MatrixSchedule MatrixSchedule::piecewise_constant(std::vector<double> breaks,
                                                  std::vector<Eigen::MatrixXd> values) {
    if (breaks.empty() || values.empty() || breaks.size() != values.size())
        throw ValidationError("piecewise-constant schedule: need matching breaks and values");
    if (breaks.front() != 0.0 || !std::is_sorted(breaks.begin(), breaks.end()))
        throw ValidationError("piecewise-constant schedule: breaks must start at 0 and increase");
    MatrixSchedule s(Form::PiecewiseConstant, values.front().rows(), values.front().cols());
    for (const auto& v : values)
        if (v.rows() != s.rows_ || v.cols() != s.cols_ || !v.allFinite())
            throw ValidationError("piecewise-constant schedule: inconsistent or non-finite values");
    s.times_ = std::move(breaks);
    s.values_ = std::move(values);
    return s;
}

MatrixSchedule MatrixSchedule::tabulated(std::vector<double> times,
                                         std::vector<Eigen::MatrixXd> values) {
    if (times.size() < 2 || times.size() != values.size())
        throw ValidationError("tabulated schedule: need at least two samples");
    if (!std::is_sorted(times.begin(), times.end()))
        throw ValidationError("tabulated schedule: times must increase");
    MatrixSchedule s(Form::Tabulated, values.front().rows(), values.front().cols());
    for (const auto& v : values)
        if (v.rows() != s.rows_ || v.cols() != s.cols_ || !v.allFinite())
            throw ValidationError("tabulated schedule: inconsistent or non-finite values");
    s.times_ = std::move(times);
    s.values_ = std::move(values);
    return s;
}

Eigen::MatrixXd MatrixSchedule::interpolate(double t) const {
    // locate the table segment containing t, clamping outside the range
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
    double t0 = times_[k], t1 = times_[k + 1];
    double w = (t - t0) / (t1 - t0);
    return (1.0 - w) * values_[k] + w * values_[k + 1];
}

Eigen::MatrixXd MatrixSchedule::value(double t) const {
    switch (form_) {
        case Form::Constant:
            return constant_;
        case Form::Polynomial: {
            Eigen::MatrixXd out(rows_, cols_);
            for (Eigen::Index i = 0; i < rows_; ++i)
                for (Eigen::Index j = 0; j < cols_; ++j) {
                    const auto& c = coeffs_[i][j];
                    double acc = 0.0;
                    for (std::size_t k = c.size(); k-- > 0;) acc = acc * t + c[k];
                    out(i, j) = acc;
                }
            return out;
        }
        case Form::PiecewiseConstant: {
            if (t <= times_.front()) return values_.front();
            auto it = std::upper_bound(times_.begin(), times_.end(), t);
            return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
        }
        case Form::Tabulated:
            return interpolate(t);
    }
    throw Error("unreachable schedule form");
}

Eigen::MatrixXd MatrixSchedule::derivative(double t, int order) const {
    if (order < 0) throw ValidationError("derivative order must be nonnegative");
    if (order == 0) return value(t);
    switch (form_) {
        case Form::Constant:
        case Form::PiecewiseConstant:
            return Eigen::MatrixXd::Zero(rows_, cols_);
        case Form::Polynomial: {
            Eigen::MatrixXd out(rows_, cols_);
            for (Eigen::Index i = 0; i < rows_; ++i)
                for (Eigen::Index j = 0; j < cols_; ++j) {
                    const auto& c = coeffs_[i][j];
                    double acc = 0.0;
                    for (std::size_t k = c.size(); k-- > static_cast<std::size_t>(order);) {
                        double fac = 1.0;
                        for (int m = 0; m < order; ++m) fac *= static_cast<double>(k - m);
                        acc = acc * t + fac * c[k];
                    }
                    out(i, j) = acc;
                }
            return out;
        }
        case Form::Tabulated: {
            if (order > kMaxTableDerivative)
                throw DerivativeOrderError(
                    "tabulated schedule supports finite-difference derivatives up to order " +
                        std::to_string(kMaxTableDerivative) + ", order " + std::to_string(order) +
                        " required",
                    order);
            const double h = kFiniteDifferenceStep;
            // shift the stencil center so that it stays inside [0, 1]
            double tc = std::clamp(t, times_.front() + order * h, times_.back() - order * h);
            if (order == 1) return (interpolate(tc + h) - interpolate(tc - h)) / (2.0 * h);
            return (interpolate(tc + h) - 2.0 * interpolate(tc) + interpolate(tc - h)) / (h * h);
        }
    }
    throw Error("unreachable schedule form");
}

int MatrixSchedule::analytic_derivative_order() const {
    return form_ == Form::Tabulated ? 0 : kUnboundedOrder;
}

int MatrixSchedule::max_derivative_order() const {
    return form_ == Form::Tabulated ? kMaxTableDerivative : kUnboundedOrder;
}

}  // namespace covsteer
