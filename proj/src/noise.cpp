#include "covsteer/noise.hpp"

#include <cmath>
#include <string>

#include "covsteer/errors.hpp"

namespace covsteer {

JumpLaw JumpLaw::constant(double value) {
    return JumpLaw(Kind::Constant, value, 0.0, 0.0);
}

JumpLaw JumpLaw::normal(double mean, double stddev) {
    if (stddev < 0.0) throw ValidationError("normal jump law: stddev must be nonnegative");
    return JumpLaw(Kind::Normal, mean, stddev, 0.0);
}

JumpLaw JumpLaw::exponential(double mean) {
    if (mean == 0.0) throw ValidationError("exponential jump law: mean must be nonzero");
    return JumpLaw(Kind::Exponential, mean, 0.0, 0.0);
}

JumpLaw JumpLaw::two_point(double value_a, double prob_a, double value_b) {
    if (prob_a < 0.0 || prob_a > 1.0)
        throw ValidationError("two-point jump law: probability outside [0, 1]");
    return JumpLaw(Kind::TwoPoint, value_a, prob_a, value_b);
}

double JumpLaw::mean() const {
    switch (kind_) {
        case Kind::Constant: return params_[0];
        case Kind::Normal: return params_[0];
        case Kind::Exponential: return params_[0];
        case Kind::TwoPoint: return params_[1] * params_[0] + (1.0 - params_[1]) * params_[2];
    }
    return 0.0;
}

double JumpLaw::second_moment() const {
    switch (kind_) {
        case Kind::Constant: return params_[0] * params_[0];
        case Kind::Normal: return params_[0] * params_[0] + params_[1] * params_[1];
        case Kind::Exponential: return 2.0 * params_[0] * params_[0];
        case Kind::TwoPoint:
            return params_[1] * params_[0] * params_[0] +
                   (1.0 - params_[1]) * params_[2] * params_[2];
    }
    return 0.0;
}

double JumpLaw::sample(std::mt19937_64& rng) const {
    switch (kind_) {
        case Kind::Constant: return params_[0];
        case Kind::Normal: {
            std::normal_distribution<double> d(params_[0], params_[1]);
            return d(rng);
        }
        case Kind::Exponential: {
            std::exponential_distribution<double> d(1.0);
            return params_[0] * d(rng);
        }
        case Kind::TwoPoint: {
            std::uniform_real_distribution<double> d(0.0, 1.0);
            return d(rng) < params_[1] ? params_[0] : params_[2];
        }
    }
    return 0.0;
}

NoiseSpec::NoiseSpec(Eigen::Index channels, std::vector<NoiseComponent> components)
    : channels_(channels), components_(std::move(components)) {
    if (channels <= 0) throw DimensionError("noise spec: channel count must be positive");
    for (const auto& comp : components_) {
        if (const auto* w = std::get_if<WienerComponent>(&comp)) {
            if (w->scale.rows() != channels || w->scale.cols() != channels)
                throw DimensionError("Wiener component: scale must be q x q");
        } else if (const auto* cp = std::get_if<CompoundPoissonComponent>(&comp)) {
            if (cp->rates.rows() != channels || cp->rates.cols() != 1)
                throw DimensionError("compound Poisson component: rates must be q x 1");
            if (static_cast<Eigen::Index>(cp->laws.size()) != channels)
                throw DimensionError("compound Poisson component: one jump law per channel");
        } else if (const auto* pre = std::get_if<PrecomputedComponent>(&comp)) {
            if (pre->intensity.rows() != channels || pre->intensity.cols() != channels)
                throw DimensionError("precomputed component: intensity must be q x q");
        }
    }
}

bool NoiseSpec::has_jumps() const {
    for (const auto& comp : components_)
        if (std::holds_alternative<CompoundPoissonComponent>(comp)) return true;
    return false;
}

NoiseSpec NoiseSpec::wiener(Eigen::MatrixXd scale) {
    Eigen::Index q = scale.rows();
    return NoiseSpec(q, {WienerComponent{std::move(scale)}});
}

NoiseSpec NoiseSpec::none(Eigen::Index channels) {
    return NoiseSpec(channels, {});
}

Eigen::MatrixXd effective_intensity(const NoiseSpec& noise, double t) {
    const Eigen::Index q = noise.channels();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(q, q);
    for (const auto& comp : noise.components()) {
        if (const auto* w = std::get_if<WienerComponent>(&comp)) {
            d += w->scale * w->scale.transpose();
        } else if (const auto* cp = std::get_if<CompoundPoissonComponent>(&comp)) {
            Eigen::VectorXd rates = cp->rates.value(t);
            for (Eigen::Index i = 0; i < q; ++i) {
                if (rates(i) < 0.0)
                    throw ValidationError("compound Poisson rate is negative at t = " +
                                          std::to_string(t));
                d(i, i) += rates(i) * cp->laws[static_cast<std::size_t>(i)].second_moment();
            }
        } else if (const auto* pre = std::get_if<PrecomputedComponent>(&comp)) {
            d += pre->intensity.value(t);
        }
    }
    return d;
}

Eigen::VectorXd compensator_drift(const NoiseSpec& noise, double t) {
    const Eigen::Index q = noise.channels();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
    for (const auto& comp : noise.components()) {
        if (const auto* cp = std::get_if<CompoundPoissonComponent>(&comp)) {
            Eigen::VectorXd rates = cp->rates.value(t);
            for (Eigen::Index i = 0; i < q; ++i) {
                if (rates(i) < 0.0)
                    throw ValidationError("compound Poisson rate is negative at t = " +
                                          std::to_string(t));
                g(i) += rates(i) * cp->laws[static_cast<std::size_t>(i)].mean();
            }
        }
    }
    return g;
}

}  // namespace covsteer
