#pragma once

// Shared generators for randomized tests: totally controllable LTV systems
// with polynomial entries, feasible Riccati anchors, and SPD matrices.

#include <random>

#include "covsteer/linalg.hpp"
#include "covsteer/propagation.hpp"
#include "covsteer/system.hpp"

namespace covsteer::testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                                     Eigen::Index cols, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
    return m;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double min_eig = 0.3) {
    Eigen::MatrixXd g = random_matrix(rng, n, n);
    return linalg::symmetrize(g * g.transpose()) + min_eig * Eigen::MatrixXd::Identity(n, n);
}

/// Degree-1 polynomial schedule with entries m0 + t * m1.
inline MatrixSchedule linear_schedule(const Eigen::MatrixXd& m0, const Eigen::MatrixXd& m1) {
    std::vector<std::vector<std::vector<double>>> coeffs(
        static_cast<std::size_t>(m0.rows()),
        std::vector<std::vector<double>>(static_cast<std::size_t>(m0.cols())));
    for (Eigen::Index i = 0; i < m0.rows(); ++i)
        for (Eigen::Index j = 0; j < m0.cols(); ++j)
            coeffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = {m0(i, j),
                                                                                m1(i, j)};
    return MatrixSchedule::polynomial(m0.rows(), m0.cols(), std::move(coeffs));
}

struct RandomSystemConfig {
    Eigen::Index n = 2;
    Eigen::Index p = 1;
    bool matched_channel = false;  // C = B, unit Wiener, R = I
    bool with_noise = true;
    double a_scale = 0.6;
};

/// Random polynomial system, resampled until the pair is solidly totally
/// controllable (Gramian eigenvalue bound).
inline LtvSystem random_system(std::mt19937_64& rng, const RandomSystemConfig& config) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        MatrixSchedule a = linear_schedule(random_matrix(rng, config.n, config.n, config.a_scale),
                                           random_matrix(rng, config.n, config.n, 0.3));
        MatrixSchedule b = linear_schedule(random_matrix(rng, config.n, config.p),
                                           random_matrix(rng, config.n, config.p, 0.3));
        MatrixSchedule r = MatrixSchedule::constant(Eigen::MatrixXd::Identity(config.p, config.p));
        Eigen::Index q = config.matched_channel ? config.p : 1;
        MatrixSchedule c = config.matched_channel
                               ? b
                               : linear_schedule(random_matrix(rng, config.n, q),
                                                 random_matrix(rng, config.n, q, 0.3));
        NoiseSpec noise = config.with_noise
                              ? NoiseSpec::wiener(config.matched_channel
                                                      ? Eigen::MatrixXd::Identity(q, q)
                                                      : random_spd(rng, q, 0.2))
                              : NoiseSpec::none(q);
        // Wiener scale must be a root of the intended intensity; random_spd
        // is already symmetric PSD so it works directly as a scale matrix.
        LtvSystem system(std::move(a), std::move(b), std::move(c), std::move(noise),
                         std::move(r));
        PropagationCache cache(system);
        Eigen::MatrixXd n10 = cache.gramian(1.0, 0.0);
        double lo = linalg::min_eigenvalue(n10), hi = linalg::max_eigenvalue(n10);
        if (lo > 1e-4 && hi / lo < 1e6) return system;
    }
    throw std::runtime_error("failed to sample a controllable system");
}

/// Random symmetric anchor satisfying the existence bound at s = 0 with a
/// comfortable margin.
inline Eigen::MatrixXd random_feasible_pi0(std::mt19937_64& rng, const PropagationCache& cache,
                                           double margin = 0.1) {
    const Eigen::Index n = cache.dim();
    Eigen::MatrixXd n10_root = linalg::sqrt_psd(cache.gramian(1.0, 0.0));
    double scale = 1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
        Eigen::MatrixXd pi0 = linalg::symmetrize(random_matrix(rng, n, n, scale));
        double top = linalg::max_eigenvalue(linalg::symmetrize(n10_root * pi0 * n10_root));
        if (top < 1.0 - margin) return pi0;
        scale *= 0.7;
    }
    throw std::runtime_error("failed to sample a feasible anchor");
}

}  // namespace covsteer::testing
