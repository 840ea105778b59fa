#pragma once

#include <Eigen/Dense>
#include <random>
#include <variant>
#include <vector>

#include "covsteer/schedule.hpp"

namespace covsteer {

/// Distribution of a single jump size with closed-form first and second
/// moments and a sampler.
class JumpLaw {
  public:
    enum class Kind { Constant, Normal, Exponential, TwoPoint };

    static JumpLaw constant(double value);
    static JumpLaw normal(double mean, double stddev);
    /// Exponentially distributed magnitude with the given mean (sign of the
    /// mean sets the jump direction).
    static JumpLaw exponential(double mean);
    /// P(value_a) = prob_a, P(value_b) = 1 - prob_a.
    static JumpLaw two_point(double value_a, double prob_a, double value_b);

    double mean() const;
    double second_moment() const;
    double sample(std::mt19937_64& rng) const;

    Kind kind() const { return kind_; }
    double param(int i) const { return params_[i]; }

  private:
    JumpLaw(Kind kind, double a, double b, double c) : kind_(kind), params_{a, b, c} {}
    Kind kind_;
    double params_[3];
};

/// Wiener noise d(scale * w); contributes scale * scale^T to D(t).
struct WienerComponent {
    Eigen::MatrixXd scale;  // q x q
};

/// Raw (uncompensated) compound Poisson jumps, one independent stream per
/// channel. Contributes diag(rate_i(t) * E[chi_i^2]) to D(t) and
/// rate_i(t) * E[chi_i] per channel to the compensator drift.
struct CompoundPoissonComponent {
    MatrixSchedule rates;       // q x 1, nonnegative
    std::vector<JumpLaw> laws;  // one per channel
};

/// A martingale specified directly by its covariance rate D(t); simulated
/// as Gaussian increments of matching covariance.
struct PrecomputedComponent {
    MatrixSchedule intensity;  // q x q PSD
};

using NoiseComponent =
    std::variant<WienerComponent, CompoundPoissonComponent, PrecomputedComponent>;

/// Declarative martingale noise model: an additive mixture of independent
/// components sharing q channels.
class NoiseSpec {
  public:
    NoiseSpec(Eigen::Index channels, std::vector<NoiseComponent> components);

    Eigen::Index channels() const { return channels_; }
    const std::vector<NoiseComponent>& components() const { return components_; }

    bool has_jumps() const;

    static NoiseSpec wiener(Eigen::MatrixXd scale);
    static NoiseSpec none(Eigen::Index channels);

  private:
    Eigen::Index channels_;
    std::vector<NoiseComponent> components_;
};

/// Covariance rate D(t) of the compensated noise, additive over components.
Eigen::MatrixXd effective_intensity(const NoiseSpec& noise, double t);

/// Mean drift rate g(t) of the raw noise (the compensator); zero for Wiener
/// and precomputed components.
Eigen::VectorXd compensator_drift(const NoiseSpec& noise, double t);

}  // namespace covsteer
