#include "covsteer/steering.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"
#include "covsteer/quadrature.hpp"
#include "covsteer/riccati.hpp"

namespace covsteer {

namespace {

constexpr double kQuadRelTol = 1e-10;
constexpr int kMaxLevel = 5;  // up to 32 panels of the 64-point rule

Eigen::MatrixXd lu_inverse(const Eigen::MatrixXd& m) {
    return m.lu().solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

BoundaryMap::BoundaryMap(const PropagationCache& cache, Eigen::MatrixXd sigma0,
                         std::function<Eigen::MatrixXd(double)> kernel)
    : cache_(cache), sigma0_(std::move(sigma0)), kernel_(std::move(kernel)) {
    const Eigen::Index n = cache_.dim();
    if (sigma0_.rows() != n || sigma0_.cols() != n)
        throw DimensionError("Sigma0 must be n x n");
    if (!kernel_) {
        const LtvSystem* sys = &cache_.system();
        kernel_ = [sys](double s) { return sys->noise_kernel(s); };
    }
    n10_ = cache_.gramian(1.0, 0.0);
    phi_a10_ = cache_.phi(1.0);
    n10_root_ = linalg::sqrt_psd(n10_);
}

const BoundaryMap::Level& BoundaryMap::level(int idx) const {
    while (static_cast<int>(levels_.size()) <= idx) {
        Level lvl;
        int panels = 1 << levels_.size();
        quad::composite_nodes(0.0, 1.0, panels, lvl.nodes, lvl.weights);
        lvl.xi.reserve(lvl.nodes.size());
        lvl.ns0.reserve(lvl.nodes.size());
        lvl.kernel.reserve(lvl.nodes.size());
        for (double s : lvl.nodes) {
            lvl.xi.push_back(cache_.phi_inverse(s));
            lvl.ns0.push_back(cache_.gramian_base(s));
            lvl.kernel.push_back(kernel_(s));
        }
        levels_.push_back(std::move(lvl));
    }
    return levels_[static_cast<std::size_t>(idx)];
}

bool BoundaryMap::feasible(const Eigen::MatrixXd& pi0, double margin) const {
    Eigen::MatrixXd sym = linalg::symmetrize(pi0);
    return linalg::max_eigenvalue(linalg::symmetrize(n10_root_ * sym * n10_root_)) <
           1.0 - margin;
}

Eigen::MatrixXd BoundaryMap::noise_term(const Eigen::MatrixXd& pi0, int level_idx) const {
    const Eigen::Index n = cache_.dim();
    const Level& lvl = level(level_idx);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < lvl.nodes.size(); ++i) {
        Eigen::MatrixXd left = lu_inverse(identity - lvl.ns0[i] * pi0);
        Eigen::MatrixXd right = lu_inverse(identity - pi0 * lvl.ns0[i]);
        Eigen::MatrixXd core = lvl.xi[i] * lvl.kernel[i] * lvl.xi[i].transpose();
        acc += lvl.weights[i] * (left * core * right);
    }
    return acc;
}

Eigen::MatrixXd BoundaryMap::evaluate_with(const Eigen::MatrixXd& pi0,
                                           const Eigen::MatrixXd& noise) const {
    const Eigen::Index n = cache_.dim();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    return phi_a10_ * (identity - n10_ * pi0) * (sigma0_ + noise) *
           (identity - pi0 * n10_) * phi_a10_.transpose();
}

Eigen::MatrixXd BoundaryMap::evaluate(const Eigen::MatrixXd& pi0) const {
    if (pi0.rows() != cache_.dim() || pi0.cols() != cache_.dim())
        throw DimensionError("Pi0 must be n x n");
    if (!feasible(pi0))
        throw InfeasibleError("Pi0 violates the existence bound Pi0 < N(1,0)^{-1}");
    Eigen::MatrixXd noise = noise_term(pi0, settled_level_);
    for (int idx = settled_level_ + 1; idx <= kMaxLevel; ++idx) {
        Eigen::MatrixXd refined = noise_term(pi0, idx);
        bool converged =
            (refined - noise).norm() <= kQuadRelTol * std::max(1.0, refined.norm());
        noise = std::move(refined);
        if (converged) {
            settled_level_ = idx - 1;
            break;
        }
        settled_level_ = idx;
    }
    return evaluate_with(pi0, noise);
}

Eigen::MatrixXd BoundaryMap::jacobian_bracket(const Eigen::MatrixXd& pi0) const {
    const Eigen::Index n = cache_.dim();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    const Level& lvl = level(std::min(settled_level_ + 1, kMaxLevel));
    Eigen::MatrixXd t10 = lu_inverse(identity - n10_ * pi0) * n10_;
    Eigen::MatrixXd bracket =
        linalg::kron(sigma0_, t10) + linalg::kron(t10, sigma0_);
    for (std::size_t i = 0; i < lvl.nodes.size(); ++i) {
        Eigen::MatrixXd left = lu_inverse(identity - lvl.ns0[i] * pi0);
        Eigen::MatrixXd ts0 = left * lvl.ns0[i];
        Eigen::MatrixXd ps = left * (lvl.xi[i] * lvl.kernel[i] * lvl.xi[i].transpose()) *
                             lu_inverse(identity - pi0 * lvl.ns0[i]);
        Eigen::MatrixXd gap = t10 - ts0;
        bracket += lvl.weights[i] * (linalg::kron(ps, gap) + linalg::kron(gap, ps));
    }
    return bracket;
}

Eigen::MatrixXd BoundaryMap::jacobian(const Eigen::MatrixXd& pi0) const {
    if (!feasible(pi0))
        throw InfeasibleError("Pi0 violates the existence bound Pi0 < N(1,0)^{-1}");
    const Eigen::Index n = cache_.dim();
    Eigen::MatrixXd closed_loop =
        phi_a10_ * (Eigen::MatrixXd::Identity(n, n) - n10_ * pi0);
    return -linalg::kron(closed_loop, closed_loop) * jacobian_bracket(pi0);
}

Eigen::MatrixXd propagate_covariance(const PropagationCache& cache, const Eigen::MatrixXd& pi0,
                                     const Eigen::MatrixXd& sigma0, double t) {
    const Eigen::Index n = cache.dim();
    if (linalg::min_eigenvalue(sigma0) < -1e-12)
        throw ValidationError("Sigma0 must be positive semidefinite");
    ExistenceCheck check = existence_condition(cache, linalg::symmetrize(pi0), 0.0);
    if (!check.feasible)
        throw InfeasibleError("Pi0 violates the existence bound Pi0 < N(1,0)^{-1}");
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    const LtvSystem& sys = cache.system();
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(n, n);
    if (t > 0.0) {
        noise = quad::integrate_matrix_adaptive(
            [&](double s) -> Eigen::MatrixXd {
                Eigen::MatrixXd left = lu_inverse(identity - cache.gramian_base(s) * pi0);
                Eigen::MatrixXd xi = cache.phi_inverse(s);
                Eigen::MatrixXd core = xi * sys.noise_kernel(s) * xi.transpose();
                return left * core * left.transpose();
            },
            0.0, t, kQuadRelTol, 32);
    }
    Eigen::MatrixXd closed_loop = cache.phi(t) * (identity - cache.gramian_base(t) * pi0);
    return linalg::symmetrize(closed_loop * (sigma0 + noise) * closed_loop.transpose());
}

Eigen::MatrixXd boundary_map(const PropagationCache& cache, const Eigen::MatrixXd& sigma0,
                             const Eigen::MatrixXd& pi0) {
    return BoundaryMap(cache, sigma0).evaluate(pi0);
}

Eigen::MatrixXd boundary_map_jacobian(const PropagationCache& cache,
                                      const Eigen::MatrixXd& sigma0,
                                      const Eigen::MatrixXd& pi0) {
    return BoundaryMap(cache, sigma0).jacobian(pi0);
}

double kernel_scale(const PropagationCache& cache) {
    const LtvSystem& sys = cache.system();
    double noise_trace = quad::integrate_adaptive(
        [&sys](double t) { return sys.noise_kernel(t).trace(); }, 0.0, 1.0, 1e-12, 16);
    double control_trace = quad::integrate_adaptive(
        [&sys](double t) { return sys.control_kernel(t).trace(); }, 0.0, 1.0, 1e-12, 16);
    if (control_trace <= 0.0)
        throw ValidationError("control channel B R^{-1} B^T vanishes identically");
    return noise_trace / control_trace;
}

Eigen::MatrixXd closed_form_pi0_scaled(const PropagationCache& cache,
                                       const Eigen::MatrixXd& sigma0,
                                       const Eigen::MatrixXd& sigma1, double scale) {
    const Eigen::Index n = cache.dim();
    if (!linalg::is_positive_definite(sigma0) || !linalg::is_positive_definite(sigma1))
        throw ValidationError("closed form requires Sigma0, Sigma1 positive definite");
    Eigen::MatrixXd n10 = cache.gramian(1.0, 0.0);
    Eigen::MatrixXd n10_inv = lu_inverse(n10);
    Eigen::MatrixXd phi_a01 = cache.phi_inverse(1.0);
    Eigen::MatrixXd sigma0_root = linalg::sqrt_psd(sigma0);
    Eigen::MatrixXd sigma0_root_inv = lu_inverse(sigma0_root);
    Eigen::MatrixXd transported = phi_a01 * sigma1 * phi_a01.transpose();
    Eigen::MatrixXd inner =
        (scale * scale / 4.0) * Eigen::MatrixXd::Identity(n, n) +
        sigma0_root * n10_inv * transported * n10_inv * sigma0_root;
    Eigen::MatrixXd pi0 = n10_inv + (scale / 2.0) * lu_inverse(sigma0) -
                          sigma0_root_inv * linalg::sqrt_psd(inner) * sigma0_root_inv;
    return linalg::symmetrize(pi0);
}

Eigen::MatrixXd closed_form_pi0(const PropagationCache& cache, const Eigen::MatrixXd& sigma0,
                                const Eigen::MatrixXd& sigma1) {
    const LtvSystem& sys = cache.system();
    for (double t : cache.grid()) {
        Eigen::MatrixXd noise_kernel = sys.noise_kernel(t);
        Eigen::MatrixXd control_kernel = sys.control_kernel(t);
        double gap = (noise_kernel - control_kernel).norm();
        if (gap > 1e-9 * std::max(1.0, control_kernel.norm()))
            throw KernelMismatchError(
                "closed form requires matched channels C D C^T = B R^{-1} B^T; mismatch at t = " +
                std::to_string(t));
    }
    return closed_form_pi0_scaled(cache, sigma0, sigma1, 1.0);
}

namespace {

/// One Newton stage against a fixed workspace. Mutates pi0 in place and
/// returns true on convergence.
bool newton_stage(const BoundaryMap& map, const Eigen::MatrixXd& sigma1, Eigen::MatrixXd& pi0,
                  SolverTrace& trace, const SolverOptions& options) {
    const Eigen::Index n = pi0.rows();
    const double target = options.tolerance * std::max(1.0, sigma1.norm());
    double step_scale = 1.0;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Eigen::MatrixXd residual = map.evaluate(pi0) - sigma1;
        double resid_norm = residual.norm();
        trace.iterates.push_back({pi0, resid_norm, step_scale});
        if (resid_norm <= target) {
            // Polish with full steps down to the rounding floor; quadratic
            // convergence makes these essentially free and tightens pi0
            // itself, not just the residual.
            for (int polish = 0; polish < 3 && resid_norm > 0.0; ++polish) {
                Eigen::MatrixXd jac = map.jacobian(pi0);
                Eigen::VectorXd direction = jac.lu().solve(-linalg::vec(residual));
                Eigen::MatrixXd candidate =
                    pi0 + linalg::symmetrize(linalg::unvec(direction, n, n));
                if (!map.feasible(candidate, options.feasibility_margin)) break;
                Eigen::MatrixXd cand_residual = map.evaluate(candidate) - sigma1;
                if (cand_residual.norm() >= resid_norm) break;
                pi0 = std::move(candidate);
                residual = std::move(cand_residual);
                resid_norm = residual.norm();
                trace.iterates.push_back({pi0, resid_norm, 1.0});
            }
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(map.jacobian(pi0));
            double smin = svd.singularValues().minCoeff();
            trace.jacobian_condition =
                smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                           : std::numeric_limits<double>::infinity();
            trace.converged = true;
            return true;
        }
        Eigen::MatrixXd jac = map.jacobian(pi0);
        Eigen::VectorXd step_vec = jac.lu().solve(-linalg::vec(residual));
        Eigen::MatrixXd step = linalg::symmetrize(linalg::unvec(step_vec, n, n));
        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= 1e-10) {
            Eigen::MatrixXd candidate = pi0 + alpha * step;
            if (map.feasible(candidate, options.feasibility_margin)) {
                double cand_norm = (map.evaluate(candidate) - sigma1).norm();
                if (cand_norm <= (1.0 - 1e-4 * alpha) * resid_norm) {
                    pi0 = std::move(candidate);
                    step_scale = alpha;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted) return false;  // stalled; caller may continue via homotopy
    }
    return false;
}

}  // namespace

Pi0Solution solve_pi0(const PropagationCache& cache, const SteeringProblem& problem,
                      const SolverOptions& options) {
    const Eigen::Index n = cache.dim();
    ValidationReport report = validate_problem(cache.system(), problem);
    if (!report.ok())
        throw ValidationError("invalid steering problem:\n" + report.to_string());
    if (!linalg::is_positive_definite(problem.sigma0))
        throw ValidationError("solve_pi0 requires Sigma0 positive definite; use the scalar "
                              "path for a singular initial covariance");
    if (linalg::min_eigenvalue(cache.gramian(1.0, 0.0)) <= 1e-12)
        throw ValidationError(
            "the pair (A, B) is not totally controllable on [0, 1]: N(1, 0) is singular");

    const Eigen::MatrixXd& sigma1 = problem.sigma1;
    BoundaryMap map(cache, problem.sigma0);
    SolverTrace trace;
    const double target = options.tolerance * std::max(1.0, sigma1.norm());

    // Trivial candidate: Sigma1 already equals the uncontrolled f(0).
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
    double zero_resid = (map.evaluate(zero) - sigma1).norm();
    if (zero_resid <= target) {
        trace.iterates.push_back({zero, zero_resid, 1.0});
        trace.converged = true;
        trace.jacobian_condition = 1.0;
        return {zero, trace};
    }

    double scale = kernel_scale(cache);
    Eigen::MatrixXd pi0 = closed_form_pi0_scaled(cache, problem.sigma0, sigma1, scale);
    if (!map.feasible(pi0, options.feasibility_margin)) pi0 = zero;

    if (newton_stage(map, sigma1, pi0, trace, options)) return {pi0, trace};

    if (options.enable_homotopy) {
        // Continuation from the surrogate kernel (exactly solvable) to the
        // true one, warm-starting each stage; the last stage runs against
        // the primary workspace.
        trace.homotopy_used = true;
        const LtvSystem* sys = &cache.system();
        pi0 = closed_form_pi0_scaled(cache, problem.sigma0, sigma1, scale);
        bool ok = true;
        for (double theta : {0.25, 0.5, 0.75}) {
            ++trace.homotopy_stages;
            BoundaryMap stage_map(
                cache, problem.sigma0, [sys, scale, theta](double s) -> Eigen::MatrixXd {
                    return (1.0 - theta) * scale * sys->control_kernel(s) +
                           theta * sys->noise_kernel(s);
                });
            ok = newton_stage(stage_map, sigma1, pi0, trace, options);
            if (!ok) break;
        }
        if (ok) {
            ++trace.homotopy_stages;
            if (newton_stage(map, sigma1, pi0, trace, options)) return {pi0, trace};
        }
    }
    throw SolverFailure("Newton iteration on the boundary map failed to converge after " +
                            std::to_string(trace.iterates.size()) + " iterates",
                        trace);
}

EtaResult eta(const PropagationCache& cache) {
    const LtvSystem& sys = cache.system();
    if (sys.n() != 1 || sys.p() != 1 || sys.q() != 1)
        throw DimensionError("eta is defined for scalar systems (n = p = q = 1)");

    if (sys.noise_kernel(0.0)(0, 0) > 0.0)
        return {EtaKind::Infinite, std::numeric_limits<double>::infinity(), {}};

    const double phi10 = cache.phi(1.0)(0, 0);
    const double n10 = cache.gramian_base(1.0)(0, 0);
    auto integrand = [&](double t) {
        double phi_t = cache.phi(t)(0, 0);
        double w_t = cache.gramian_base(t)(0, 0);
        return sys.noise_kernel(t)(0, 0) / (phi_t * phi_t * w_t * w_t);
    };
    // Partial integrals on [eps, 1]; dyadic panels toward the left endpoint
    // resolve the power-law blowup.
    auto partial = [&](double eps) {
        double acc = 0.0;
        double lo = eps;
        while (lo < 1.0) {
            double hi = std::min(1.0, 2.0 * lo);
            acc += quad::integrate(integrand, lo, hi, 2);
            lo = hi;
        }
        return phi10 * phi10 * n10 * n10 * acc;
    };

    EtaResult result;
    const double epsilons[4] = {1e-2, 1e-3, 1e-4, 1e-5};
    for (int k = 0; k < 4; ++k)
        result.partial_integrals[static_cast<std::size_t>(k)] = partial(epsilons[k]);
    const auto& parts = result.partial_integrals;
    double inc2 = parts[2] - parts[1];
    double inc3 = parts[3] - parts[2];
    result.value = parts[3];

    if (std::abs(inc3) <= 1e-4 * std::max(std::abs(parts[3]), 1e-300)) {
        // Cauchy-converged; remove the geometric tail when the increment
        // ratio is stable.
        if (std::abs(inc2) > 0.0) {
            double ratio = inc3 / inc2;
            if (ratio > 0.0 && ratio < 0.9) result.value = parts[3] + inc3 * ratio / (1.0 - ratio);
        }
        result.kind = EtaKind::Finite;
        return result;
    }
    if (std::abs(inc3) >= 0.5 * std::abs(inc2)) {
        result.kind = EtaKind::Infinite;
        result.value = std::numeric_limits<double>::infinity();
        return result;
    }
    result.kind = EtaKind::Undetermined;
    return result;
}

double solve_pi0_scalar(const PropagationCache& cache, double sigma0, double sigma1,
                        double tolerance) {
    const LtvSystem& sys = cache.system();
    if (sys.n() != 1)
        throw DimensionError("solve_pi0_scalar requires a scalar state (n = 1)");
    if (sigma0 < 0.0) throw ValidationError("sigma0 must be nonnegative");
    if (sigma1 <= 0.0) throw ValidationError("sigma1 must be positive");

    if (sigma0 == 0.0) {
        EtaResult sup = eta(cache);
        if (sup.kind == EtaKind::Finite && sigma1 >= sup.value)
            throw InfeasibleError(
                "with a deterministic initial state the terminal variance must stay below "
                "the reachable supremum eta = " +
                std::to_string(sup.value) + "; requested sigma1 = " + std::to_string(sigma1));
    }

    const double n10 = cache.gramian_base(1.0)(0, 0);
    if (n10 <= 0.0)
        throw ValidationError("the scalar pair (a, b) is not totally controllable");
    BoundaryMap map(cache, Eigen::MatrixXd::Constant(1, 1, sigma0));
    auto f = [&](double pi) {
        return map.evaluate(Eigen::MatrixXd::Constant(1, 1, pi))(0, 0);
    };
    const double target = tolerance * std::max(1.0, sigma1);

    // f is monotonically decreasing; expand the left end until it brackets.
    double hi = (1.0 - 1e-12) / n10;
    double lo = -1.0;
    while (f(lo) < sigma1) {
        lo *= 2.0;
        if (lo < -1e13) {
            if (sigma0 == 0.0)
                throw InfeasibleError(
                    "sigma1 = " + std::to_string(sigma1) +
                    " is not reachable from a deterministic initial state (at or above the "
                    "supremum eta of terminal variances)");
            throw SolverError("failed to bracket the scalar boundary map");
        }
    }
    for (int iter = 0; iter < 300; ++iter) {
        double mid = 0.5 * (lo + hi);
        double val = f(mid);
        if (std::abs(val - sigma1) <= target) return mid;
        (val > sigma1 ? lo : hi) = mid;
    }
    throw SolverError("scalar bisection failed to reach the residual tolerance");
}

}  // namespace covsteer
