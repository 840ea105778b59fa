#include <doctest.h>

#include "covsteer/errors.hpp"
#include "covsteer/schedule.hpp"

using namespace covsteer;

TEST_CASE("polynomial schedule evaluates and differentiates exactly") {
    // entry = 0.8 - 0.1 t
    MatrixSchedule a = MatrixSchedule::scalar_polynomial({0.8, -0.1});
    CHECK(a.value(0.0)(0, 0) == doctest::Approx(0.8));
    CHECK(a.value(1.0)(0, 0) == doctest::Approx(0.7));
    CHECK(a.derivative(0.4, 1)(0, 0) == doctest::Approx(-0.1));
    CHECK(a.derivative(0.4, 2)(0, 0) == doctest::Approx(0.0));

    // entry = 1 + 2t + 3t^2
    MatrixSchedule poly = MatrixSchedule::scalar_polynomial({1.0, 2.0, 3.0});
    CHECK(poly.value(0.5)(0, 0) == doctest::Approx(1.0 + 1.0 + 0.75));
    CHECK(poly.derivative(0.5, 1)(0, 0) == doctest::Approx(2.0 + 3.0));
    CHECK(poly.derivative(0.5, 2)(0, 0) == doctest::Approx(6.0));
    CHECK(poly.derivative(0.5, 3)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("piecewise-constant schedule steps and has zero derivative") {
    Eigen::MatrixXd v0 = Eigen::MatrixXd::Constant(1, 1, 2.0);
    Eigen::MatrixXd v1 = Eigen::MatrixXd::Constant(1, 1, -1.0);
    MatrixSchedule s = MatrixSchedule::piecewise_constant({0.0, 0.5}, {v0, v1});
    CHECK(s.value(0.25)(0, 0) == 2.0);
    CHECK(s.value(0.5)(0, 0) == -1.0);
    CHECK(s.value(0.75)(0, 0) == -1.0);
    CHECK(s.derivative(0.25, 1)(0, 0) == 0.0);
}

TEST_CASE("tabulated schedule interpolates and falls back to finite differences") {
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> values;
    for (int k = 0; k <= 100; ++k) {
        double t = k / 100.0;
        times.push_back(t);
        values.push_back(Eigen::MatrixXd::Constant(1, 1, 2.0 + t));
    }
    MatrixSchedule s = MatrixSchedule::tabulated(times, values);
    CHECK(s.value(0.333)(0, 0) == doctest::Approx(2.333));
    CHECK(s.derivative(0.4, 1)(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.analytic_derivative_order() == 0);
    CHECK_THROWS_AS(s.derivative(0.4, 3), DerivativeOrderError);
}

TEST_CASE("schedule constructors validate input") {
    CHECK_THROWS_AS(MatrixSchedule::tabulated({0.0}, {Eigen::MatrixXd::Zero(1, 1)}),
                    ValidationError);
    CHECK_THROWS_AS(MatrixSchedule::piecewise_constant({0.5}, {Eigen::MatrixXd::Zero(1, 1)}),
                    ValidationError);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(1, 1,
                                                    std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(MatrixSchedule::constant(bad), ValidationError);
}
