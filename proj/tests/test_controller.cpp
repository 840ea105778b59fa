#include <doctest.h>

#include <cmath>
#include <random>

#include "covsteer/controller.hpp"
#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"
#include "covsteer/montecarlo.hpp"
#include "covsteer/ode.hpp"
#include "covsteer/quadrature.hpp"
#include "covsteer/riccati.hpp"
#include "covsteer/scenario.hpp"
#include "support/random_systems.hpp"

using namespace covsteer;

namespace {

LtvSystem scalar_plain() {
    // a = 0, b = r = 1, unit Wiener noise
    return LtvSystem(MatrixSchedule::scalar_polynomial({0.0}),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                     NoiseSpec::wiener(Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)));
}

Eigen::VectorXd integrate_mean(const PropagationCache& cache,
                               const std::function<Eigen::VectorXd(double)>& nu,
                               const Eigen::MatrixXd& pi0, const Eigen::VectorXd& mu0) {
    const LtvSystem& sys = cache.system();
    auto rhs = [&](double t, const Eigen::VectorXd& mu) -> Eigen::VectorXd {
        Eigen::MatrixXd gain =
            -sys.r().value(t).ldlt().solve(sys.b().value(t).transpose() *
                                           pi_at(cache, pi0, 0.0, t));
        return sys.a().value(t) * mu + sys.b().value(t) * (gain * mu + nu(t)) +
               sys.drift_into_state(t);
    };
    ode::Options tight;
    tight.abs_tol = 1e-12;
    tight.rel_tol = 1e-10;
    return ode::integrate(rhs, 0.0, 1.0, mu0, tight).final_state();
}

}  // namespace

TEST_CASE("mean feedforward closed forms") {
    PropagationCache cache(scalar_plain());

    // mu0 = mu1 = 0, no drift: nu vanishes
    auto zero_nu = mean_feedforward(cache, Eigen::MatrixXd::Zero(1, 1),
                                    Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
    for (double t : {0.0, 0.5, 1.0}) CHECK(std::abs(zero_nu(t)(0)) < 1e-12);

    // pi = 0, no drift: nu is the constant mu1 - mu0
    auto const_nu = mean_feedforward(cache, Eigen::MatrixXd::Zero(1, 1),
                                     Eigen::VectorXd::Constant(1, 2.0),
                                     Eigen::VectorXd::Constant(1, 5.0));
    for (double t : {0.0, 0.3, 1.0}) CHECK(const_nu(t)(0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("population feedforward steers the mean exactly and minimizes energy") {
    Scenario pop = example1_scenario();
    PropagationCache cache(pop.system);
    double pi0_scalar = solve_pi0_scalar(cache, 6.0, 2.0);
    Eigen::MatrixXd pi0 = Eigen::MatrixXd::Constant(1, 1, pi0_scalar);
    auto nu = mean_feedforward(cache, pi0, pop.problem.mu0, pop.problem.mu1);

    Eigen::VectorXd terminal = integrate_mean(cache, nu, pi0, pop.problem.mu0);
    CHECK(terminal(0) == doctest::Approx(60.0).epsilon(1e-8));

    // perturbing nu with a mean-preserving wiggle must cost strictly more
    auto wiggle = [](double t) { return std::sin(2.0 * M_PI * t) - 0.1; };
    auto reach_of = [&](const std::function<double(double)>& f) {
        auto rhs = [&](double t, const Eigen::VectorXd& mu) -> Eigen::VectorXd {
            Eigen::MatrixXd gain =
                -cache.system().b().value(t).transpose() * pi_at(cache, pi0, 0.0, t);
            return cache.system().a().value(t) * mu + gain * mu +
                   Eigen::VectorXd::Constant(1, f(t));
        };
        return ode::integrate(rhs, 0.0, 1.0, Eigen::VectorXd::Zero(1)).final_state()(0);
    };
    double beta = reach_of(wiggle) / reach_of([&](double t) { return nu(t)(0); });
    auto perturbed = [&](double t) { return nu(t)(0) + wiggle(t) - beta * nu(t)(0); };
    Eigen::VectorXd perturbed_terminal = integrate_mean(
        cache, [&](double t) { return Eigen::VectorXd::Constant(1, perturbed(t)); }, pi0,
        pop.problem.mu0);
    REQUIRE(perturbed_terminal(0) == doctest::Approx(60.0).epsilon(1e-6));
    auto energy = [&](const std::function<double(double)>& f) {
        return quad::integrate_adaptive([&](double t) { return f(t) * f(t); }, 0.0, 1.0);
    };
    CHECK(energy([&](double t) { return nu(t)(0); }) < energy(perturbed));
}

TEST_CASE("synthesize: trivial target leaves gains at zero") {
    PropagationCache cache(scalar_plain());
    BoundaryMap map(cache, Eigen::MatrixXd::Identity(1, 1));
    double f0 = map.evaluate(Eigen::MatrixXd::Zero(1, 1))(0, 0);
    SteeringProblem trivial{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1),
                            Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, f0)};
    SynthesisResult result = synthesize(scalar_plain(), trivial, {}, 101);
    CHECK(result.pi0.norm() < 1e-9);
    for (const auto& gain : result.schedule.gains) CHECK(gain.norm() < 1e-9);
    for (const auto& nu : result.schedule.feedforward) CHECK(nu.norm() < 1e-9);
}

TEST_CASE("synthesize on the rain scenario: gain structure and attainment") {
    Scenario rain = example2_scenario();
    SynthesisResult result = synthesize(rain.system, rain.problem);
    CHECK(result.trace.converged);
    REQUIRE(result.schedule.grid.size() == 1001);

    PropagationCache cache(rain.system);
    // K(t) = -[Pi_21(t), Pi_22(t)] for B = [0, 1]^T, R = 1
    for (double t : {0.0, 0.5, 1.0}) {
        Eigen::MatrixXd pi_t = pi_at(cache, result.pi0, 0.0, t);
        Eigen::MatrixXd gain = result.schedule.dense_gain(t);
        CHECK(gain(0, 0) == doctest::Approx(-pi_t(1, 0)).epsilon(1e-10));
        CHECK(gain(0, 1) == doctest::Approx(-pi_t(1, 1)).epsilon(1e-10));
    }

    // terminal covariance from the quadrature form
    Eigen::MatrixXd sigma1 = propagate_covariance(cache, result.pi0, rain.problem.sigma0, 1.0);
    CHECK((sigma1 - rain.problem.sigma1).cwiseAbs().maxCoeff() < 1e-8);

    // terminal mean via the schedule-driven mean ODE
    std::vector<Eigen::VectorXd> means =
        mean_trajectory(rain.system, result.schedule, rain.problem.mu0);
    CHECK(means.back().cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("expected cost: zero law, pure mean steering, grid mismatch") {
    // K = 0, nu = 0 gives J = 0
    LtvSystem sys = scalar_plain();
    GainSchedule schedule;
    schedule.grid = uniform_grid(101);
    schedule.gains.assign(101, Eigen::MatrixXd::Zero(1, 1));
    schedule.feedforward.assign(101, Eigen::VectorXd::Zero(1));
    std::vector<Eigen::MatrixXd> sigma(101, Eigen::MatrixXd::Identity(1, 1));
    std::vector<Eigen::VectorXd> mu(101, Eigen::VectorXd::Zero(1));
    CHECK(expected_cost(sys, schedule, sigma, mu) == 0.0);

    // constant nu = mu1 - mu0 with K = 0: J = (mu1 - mu0)^2
    for (std::size_t k = 0; k < 101; ++k) {
        schedule.feedforward[k] = Eigen::VectorXd::Constant(1, 3.0);
        mu[k] = Eigen::VectorXd::Constant(1, 2.0 + 3.0 * schedule.grid[k]);
    }
    CHECK(expected_cost(sys, schedule, sigma, mu) == doctest::Approx(9.0).epsilon(1e-12));

    std::vector<Eigen::VectorXd> short_mu(50, Eigen::VectorXd::Zero(1));
    CHECK_THROWS_AS(expected_cost(sys, schedule, sigma, short_mu), ValidationError);
}

TEST_CASE("feedforward shifts the mean only, never the covariance") {
    Scenario rain = example2_scenario();
    SynthesisResult result = synthesize(rain.system, rain.problem);

    GainSchedule stripped = result.schedule;
    for (auto& nu : stripped.feedforward) nu.setZero();
    stripped.exact_feedforward = [](double) { return Eigen::VectorXd::Zero(1); };
    auto grid = std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0};
    auto with_nu = mc::covariance_ode(rain.system, result.schedule, rain.problem.sigma0, grid);
    auto without_nu = mc::covariance_ode(rain.system, stripped, rain.problem.sigma0, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK((with_nu[k] - without_nu[k]).norm() < 1e-12);
}
