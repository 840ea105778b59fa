#include <doctest.h>

#include <cmath>
#include <random>

#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"
#include "covsteer/scenario.hpp"
#include "covsteer/steering.hpp"
#include "support/random_systems.hpp"

using namespace covsteer;

namespace {

LtvSystem scalar_free(double wiener_scale = 1.0) {
    return LtvSystem(MatrixSchedule::scalar_polynomial({0.0}),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                     NoiseSpec::wiener(wiener_scale * Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)));
}

/// n-dim system with A = 0, B = C = I and adjustable Wiener scale.
LtvSystem still_system(Eigen::Index n, double wiener_scale) {
    MatrixSchedule eye = MatrixSchedule::constant(Eigen::MatrixXd::Identity(n, n));
    MatrixSchedule zero = MatrixSchedule::constant(Eigen::MatrixXd::Zero(n, n));
    return LtvSystem(zero, eye, eye,
                     NoiseSpec::wiener(wiener_scale * Eigen::MatrixXd::Identity(n, n)), eye);
}

/// Scalar system with a = 0, b = r = 1 and noise kernel d(t) c(t)^2 given by
/// a polynomial in t (via the C schedule with unit precomputed intensity).
LtvSystem scalar_kernel_system(std::vector<double> c_coeffs) {
    return LtvSystem(MatrixSchedule::scalar_polynomial({0.0}),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::scalar_polynomial(std::move(c_coeffs)),
                     NoiseSpec::wiener(Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)));
}

}  // namespace

TEST_CASE("propagate_covariance closed forms") {
    // noise off, pi0 = 0: pure transport of Sigma0
    LtvSystem noise_free(MatrixSchedule::scalar_polynomial({0.8, -0.1}),
                         MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                         MatrixSchedule::constant(Eigen::MatrixXd::Zero(1, 1)),
                         NoiseSpec::wiener(Eigen::MatrixXd::Identity(1, 1)),
                         MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)));
    PropagationCache nf_cache(noise_free);
    Eigen::MatrixXd sigma0 = Eigen::MatrixXd::Constant(1, 1, 3.0);
    for (double t : {0.4, 1.0}) {
        double phi = nf_cache.transition(t, 0.0)(0, 0);
        CHECK(propagate_covariance(nf_cache, Eigen::MatrixXd::Zero(1, 1), sigma0, t)(0, 0) ==
              doctest::Approx(phi * phi * 3.0).epsilon(1e-9));
    }

    // A = 0, B = I, C D C^T = I, pi0 = 0: Sigma(t) = Sigma0 + t I
    PropagationCache still(still_system(2, 1.0));
    Eigen::MatrixXd s0 = testing::random_spd(*(new std::mt19937_64(3)), 2);
    Eigen::MatrixXd s1 = propagate_covariance(still, Eigen::MatrixXd::Zero(2, 2), s0, 1.0);
    CHECK((s1 - s0 - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-9);

    // scalar, noise kernel 0, sigma0 = 1, pi0 = 0.5: sigma(1) = 0.25
    LtvSystem damped(MatrixSchedule::scalar_polynomial({0.0}),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::constant(Eigen::MatrixXd::Zero(1, 1)),
                     NoiseSpec::wiener(Eigen::MatrixXd::Identity(1, 1)),
                     MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)));
    PropagationCache dcache(damped);
    CHECK(propagate_covariance(dcache, Eigen::MatrixXd::Constant(1, 1, 0.5),
                               Eigen::MatrixXd::Identity(1, 1), 1.0)(0, 0) ==
          doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("boundary map closed forms and domain errors") {
    // A = 0, B = I, noise off: f(Pi0) = (I - Pi0) Sigma0 (I - Pi0)
    std::mt19937_64 rng(5);
    LtvSystem sys = still_system(2, 0.0);
    PropagationCache cache(sys);
    Eigen::MatrixXd sigma0 = testing::random_spd(rng, 2);
    BoundaryMap map(cache, sigma0);
    Eigen::MatrixXd pi0 = linalg::symmetrize(testing::random_matrix(rng, 2, 2, 0.3));
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    CHECK((map.evaluate(pi0) - (eye - pi0) * sigma0 * (eye - pi0)).norm() < 1e-9);
    // zero anchor: transport only
    CHECK((map.evaluate(Eigen::MatrixXd::Zero(2, 2)) - sigma0).norm() < 1e-9);

    // unit noise: f(0) = Sigma0 + I
    PropagationCache noisy(still_system(2, 1.0));
    BoundaryMap noisy_map(noisy, sigma0);
    CHECK((noisy_map.evaluate(Eigen::MatrixXd::Zero(2, 2)) - sigma0 - eye).norm() < 1e-9);

    // infeasible argument is a domain error
    CHECK_THROWS_AS(noisy_map.evaluate(2.0 * eye), InfeasibleError);

    // agreement with propagate_covariance at t = 1
    Eigen::MatrixXd via_cov = propagate_covariance(noisy, pi0, sigma0, 1.0);
    CHECK((noisy_map.evaluate(pi0) - via_cov).norm() < 1e-8);
}

TEST_CASE("jacobian scalar oracle and trivial structure") {
    // n=1, a=0, b=1, noise off, sigma0 = 1: f = (1 - pi)^2, df = -2 (1 - pi)
    PropagationCache cache(still_system(1, 0.0));
    BoundaryMap map(cache, Eigen::MatrixXd::Identity(1, 1));
    Eigen::MatrixXd half = Eigen::MatrixXd::Constant(1, 1, 0.5);
    CHECK(map.jacobian(half)(0, 0) == doctest::Approx(-1.0).epsilon(1e-10));

    // noise-free, A = 0, B = I, Pi0 = 0: jacobian = -(Sigma0 x I + I x Sigma0)
    std::mt19937_64 rng(7);
    PropagationCache cache2(still_system(2, 0.0));
    Eigen::MatrixXd sigma0 = testing::random_spd(rng, 2);
    BoundaryMap map2(cache2, sigma0);
    Eigen::MatrixXd expected = -(linalg::kron(sigma0, Eigen::MatrixXd::Identity(2, 2)) +
                                 linalg::kron(Eigen::MatrixXd::Identity(2, 2), sigma0));
    CHECK((map2.jacobian(Eigen::MatrixXd::Zero(2, 2)) - expected).norm() < 1e-9);
}

TEST_CASE("jacobian matches central finite differences with noisy kernels") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        testing::RandomSystemConfig config;
        config.n = 1 + static_cast<Eigen::Index>(rng() % 3);
        config.p = 1 + static_cast<Eigen::Index>(rng() % config.n);
        LtvSystem sys = testing::random_system(rng, config);
        PropagationCache cache(sys);
        Eigen::MatrixXd sigma0 = testing::random_spd(rng, config.n);
        BoundaryMap map(cache, sigma0);
        Eigen::MatrixXd pi0 = testing::random_feasible_pi0(rng, cache);
        const Eigen::Index n = config.n;

        Eigen::MatrixXd analytic = map.jacobian(pi0);
        Eigen::MatrixXd fd(n * n, n * n);
        const double h = 1e-6;
        for (Eigen::Index col = 0; col < n * n; ++col) {
            Eigen::MatrixXd direction = Eigen::MatrixXd::Zero(n, n);
            direction(col % n, col / n) = 1.0;
            Eigen::MatrixXd plus = map.evaluate(pi0 + h * direction);
            Eigen::MatrixXd minus = map.evaluate(pi0 - h * direction);
            fd.col(col) = linalg::vec(((plus - minus) / (2.0 * h)).eval());
        }
        CHECK((analytic - fd).norm() / fd.norm() < 1e-5);

        // the bracket is symmetric positive definite
        Eigen::MatrixXd bracket = map.jacobian_bracket(pi0);
        CHECK(linalg::asymmetry(bracket) < 1e-9);
        CHECK(linalg::min_eigenvalue(bracket) > 0.0);
    }
}

TEST_CASE("closed-form pi0: scalar value, inverse consistency, round trip") {
    // n=1, a=0, b=c=d=r=1, sigma0=sigma1=1 -> pi0 = 3/2 - sqrt(5)/2
    PropagationCache cache(scalar_free());
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd pi0 = closed_form_pi0(cache, one, one);
    CHECK(pi0(0, 0) == doctest::Approx(1.5 - std::sqrt(5.0) / 2.0).epsilon(1e-10));
    BoundaryMap map(cache, one);
    CHECK(map.evaluate(pi0)(0, 0) == doctest::Approx(1.0).epsilon(1e-9));

    // if Sigma1 = f(0), the closed form returns zero
    Eigen::MatrixXd f0 = map.evaluate(Eigen::MatrixXd::Zero(1, 1));
    CHECK(closed_form_pi0(cache, one, f0).norm() < 1e-9);

    // mismatched channels are rejected
    Scenario rain = example2_scenario();
    PropagationCache rain_cache(rain.system);
    CHECK_THROWS_AS(closed_form_pi0(rain_cache, rain.problem.sigma0, rain.problem.sigma1),
                    KernelMismatchError);
}

TEST_CASE("closed form agrees with Newton on matched channels") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 4; ++trial) {
        testing::RandomSystemConfig config;
        config.n = 1 + static_cast<Eigen::Index>(rng() % 3);
        config.p = config.n;
        config.matched_channel = true;
        LtvSystem sys = testing::random_system(rng, config);
        PropagationCache cache(sys);
        SteeringProblem problem{Eigen::VectorXd::Zero(config.n),
                                testing::random_spd(rng, config.n),
                                Eigen::VectorXd::Zero(config.n),
                                testing::random_spd(rng, config.n)};
        Eigen::MatrixXd direct = closed_form_pi0(cache, problem.sigma0, problem.sigma1);
        Pi0Solution solved = solve_pi0(cache, problem);
        CHECK((direct - solved.pi0).norm() < 1e-8);
    }
}

TEST_CASE("solve_pi0: trivial root, round trip, trace invariants") {
    std::mt19937_64 rng(17);
    testing::RandomSystemConfig config;
    config.n = 2;
    config.p = 1;
    LtvSystem sys = testing::random_system(rng, config);
    PropagationCache cache(sys);
    Eigen::MatrixXd sigma0 = testing::random_spd(rng, 2);
    BoundaryMap map(cache, sigma0);

    // Sigma1 = f(0) returns the zero matrix immediately
    Eigen::MatrixXd f0 = map.evaluate(Eigen::MatrixXd::Zero(2, 2));
    SteeringProblem trivial{Eigen::VectorXd::Zero(2), sigma0, Eigen::VectorXd::Zero(2), f0};
    Pi0Solution trivial_sol = solve_pi0(cache, trivial);
    CHECK(trivial_sol.pi0.norm() == 0.0);
    CHECK(trivial_sol.trace.iterates.size() <= 2);

    // round trip through a random feasible target
    Eigen::MatrixXd pi_star = testing::random_feasible_pi0(rng, cache);
    SteeringProblem problem{Eigen::VectorXd::Zero(2), sigma0, Eigen::VectorXd::Zero(2),
                            map.evaluate(pi_star)};
    Pi0Solution sol = solve_pi0(cache, problem);
    CHECK((sol.pi0 - pi_star).norm() < 1e-7);
    CHECK(sol.trace.converged);
    CHECK(sol.trace.iterates.back().residual <=
          1e-10 * std::max(1.0, problem.sigma1.norm()));
    Eigen::MatrixXd n10_root = linalg::sqrt_psd(cache.gramian(1.0, 0.0));
    for (const auto& iterate : sol.trace.iterates)
        CHECK(linalg::max_eigenvalue(
                  linalg::symmetrize(n10_root * iterate.pi0 * n10_root)) < 1.0);
}

TEST_CASE("rain scenario solve hits the target covariance") {
    Scenario rain = example2_scenario();
    PropagationCache cache(rain.system);
    Pi0Solution sol = solve_pi0(cache, rain.problem);
    BoundaryMap map(cache, rain.problem.sigma0);
    CHECK((map.evaluate(sol.pi0) - rain.problem.sigma1).norm() < 1e-10);
    CHECK(sol.trace.converged);
}

TEST_CASE("eta classification") {
    // c(0) d(0) != 0: infinite immediately
    EtaResult direct = eta(PropagationCache(scalar_free()));
    CHECK(direct.kind == EtaKind::Infinite);

    // d c^2 = t^2: eta = 1 exactly
    EtaResult quadratic = eta(PropagationCache(scalar_kernel_system({0.0, 1.0})));
    CHECK(quadratic.kind == EtaKind::Finite);
    CHECK(quadratic.value == doctest::Approx(1.0).epsilon(1e-6));

    // d c^2 = t: logarithmic divergence
    LtvSystem lin(MatrixSchedule::scalar_polynomial({0.0}),
                  MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                  MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)),
                  NoiseSpec(1, {PrecomputedComponent{MatrixSchedule::scalar_polynomial(
                                   {0.0, 1.0})}}),
                  MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1)));
    EtaResult log_div = eta(PropagationCache(lin));
    CHECK(log_div.kind == EtaKind::Infinite);

    // non-scalar systems are rejected
    CHECK_THROWS_AS(eta(PropagationCache(example2_scenario().system)), DimensionError);
}

TEST_CASE("scalar solver: trivial root, population scenario, singular start") {
    // sigma1 = f(0) -> pi0 = 0
    PropagationCache cache(scalar_free());
    BoundaryMap map(cache, Eigen::MatrixXd::Identity(1, 1));
    double f0 = map.evaluate(Eigen::MatrixXd::Zero(1, 1))(0, 0);
    CHECK(std::abs(solve_pi0_scalar(cache, 1.0, f0)) < 1e-9);

    // population scenario: f(pi0) = 2 within 1e-10
    Scenario pop = example1_scenario();
    PropagationCache pop_cache(pop.system);
    double pi0 = solve_pi0_scalar(pop_cache, 6.0, 2.0);
    BoundaryMap pop_map(pop_cache, Eigen::MatrixXd::Constant(1, 1, 6.0));
    CHECK(pop_map.evaluate(Eigen::MatrixXd::Constant(1, 1, pi0))(0, 0) ==
          doctest::Approx(2.0).epsilon(1e-10));

    // sigma0 = 0 with sigma1 above eta = 1 is rejected
    PropagationCache quad_cache(scalar_kernel_system({0.0, 1.0}));
    CHECK_THROWS_AS(solve_pi0_scalar(quad_cache, 0.0, 2.0), InfeasibleError);
    // but a target below eta works and round-trips
    double pi_low = solve_pi0_scalar(quad_cache, 0.0, 0.5);
    BoundaryMap quad_map(quad_cache, Eigen::MatrixXd::Zero(1, 1));
    CHECK(quad_map.evaluate(Eigen::MatrixXd::Constant(1, 1, pi_low))(0, 0) ==
          doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("scalar monotonicity and limit behavior") {
    PropagationCache cache(scalar_kernel_system({0.0, 1.0}));
    BoundaryMap map(cache, Eigen::MatrixXd::Zero(1, 1));  // sigma0 = 0
    auto f = [&](double pi) {
        return map.evaluate(Eigen::MatrixXd::Constant(1, 1, pi))(0, 0);
    };
    // strictly decreasing on a sampled grid of feasible pi0
    double previous = f(-8.0);
    for (double pi : {-4.0, -2.0, -1.0, 0.0, 0.5, 0.9}) {
        double value = f(pi);
        CHECK(value < previous);
        previous = value;
    }
    // f increases toward eta = 1 as pi0 drops to -1e4
    double last = 0.0;
    for (double pi : {-10.0, -100.0, -1000.0, -10000.0}) {
        double value = f(pi);
        CHECK(value > last);
        CHECK(value < 1.0);
        last = value;
    }
    CHECK(last > 0.998);  // gap to eta shrinks like 1 / |pi0|

    // degeneration: pi0 -> N(1,0)^{-1} drives f to zero monotonically
    double n10 = cache.gramian_base(1.0)(0, 0);
    double prev_norm = std::numeric_limits<double>::infinity();
    for (int k = 2; k <= 6; ++k) {
        double margin = std::pow(10.0, -k);
        double value = f((1.0 - margin) / n10);
        CHECK(value < prev_norm);
        prev_norm = value;
    }
    CHECK(prev_norm < 1e-4);
}

TEST_CASE("round-trip bijectivity over random instances") {
    std::mt19937_64 rng(19);
    int homotopy_count = 0;
    const int trials = 12;
    for (int trial = 0; trial < trials; ++trial) {
        testing::RandomSystemConfig config;
        config.n = 1 + static_cast<Eigen::Index>(rng() % 3);
        config.p = 1 + static_cast<Eigen::Index>(rng() % config.n);
        LtvSystem sys = testing::random_system(rng, config);
        PropagationCache cache(sys);
        Eigen::MatrixXd sigma0 = testing::random_spd(rng, config.n);
        BoundaryMap map(cache, sigma0);
        Eigen::MatrixXd pi_star = testing::random_feasible_pi0(rng, cache);
        SteeringProblem problem{Eigen::VectorXd::Zero(config.n), sigma0,
                                Eigen::VectorXd::Zero(config.n), map.evaluate(pi_star)};
        Pi0Solution sol = solve_pi0(cache, problem);
        CHECK((sol.pi0 - pi_star).norm() < 1e-7);
        if (sol.trace.homotopy_used) ++homotopy_count;
    }
    CHECK(homotopy_count <= trials / 10);
}
