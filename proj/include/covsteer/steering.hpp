#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "covsteer/errors.hpp"
#include "covsteer/propagation.hpp"
#include "covsteer/system.hpp"

namespace covsteer {

/// Workspace for the boundary map f : Pi(0) -> Sigma(1),
///
///   f(Pi0) = Phi_A10 (I - N10 Pi0) [ Sigma0 + integral_0^1 P_s ds ]
///            (I - Pi0 N10) Phi_A10^T,
///   P_s    = (I - N_s0 Pi0)^{-1} Phi_A(0,s) K(s) Phi_A(0,s)^T (I - Pi0 N_s0)^{-1},
///
/// where K(s) is the noise kernel (C D C^T by default; the homotopy solver
/// substitutes blended kernels). Quadrature is composite 64-point
/// Gauss-Legendre, with the panel count doubled until two successive values
/// agree to 1e-10 relatively; transition/Gramian samples per panel level are
/// cached. Instances are not safe for concurrent use.
class BoundaryMap {
  public:
    BoundaryMap(const PropagationCache& cache, Eigen::MatrixXd sigma0,
                std::function<Eigen::MatrixXd(double)> kernel = {});

    const Eigen::MatrixXd& n10() const { return n10_; }
    const Eigen::MatrixXd& phi_a10() const { return phi_a10_; }
    const Eigen::MatrixXd& sigma0() const { return sigma0_; }
    const PropagationCache& cache() const { return cache_; }

    /// True when max eig of N10^{1/2} Pi0 N10^{1/2} < 1 - margin.
    bool feasible(const Eigen::MatrixXd& pi0, double margin = 0.0) const;

    /// f(Pi0). Throws InfeasibleError outside the domain. Accepts mildly
    /// asymmetric arguments (finite-difference probes) verbatim.
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& pi0) const;

    /// Analytic Jacobian of the vectorized map, an n^2 x n^2 matrix
    /// (column-major vec convention).
    Eigen::MatrixXd jacobian(const Eigen::MatrixXd& pi0) const;

    /// The symmetric bracket S with jacobian = -(Phi x Phi) S; positive
    /// definite on the feasible domain.
    Eigen::MatrixXd jacobian_bracket(const Eigen::MatrixXd& pi0) const;

  private:
    struct Level {
        std::vector<double> nodes, weights;
        std::vector<Eigen::MatrixXd> xi;      // Phi_A(0, s)
        std::vector<Eigen::MatrixXd> ns0;     // N(s, 0)
        std::vector<Eigen::MatrixXd> kernel;  // K(s)
    };
    const Level& level(int idx) const;
    Eigen::MatrixXd noise_term(const Eigen::MatrixXd& pi0, int level_idx) const;
    Eigen::MatrixXd evaluate_with(const Eigen::MatrixXd& pi0, const Eigen::MatrixXd& noise) const;

    const PropagationCache& cache_;
    Eigen::MatrixXd sigma0_;
    std::function<Eigen::MatrixXd(double)> kernel_;
    Eigen::MatrixXd n10_, phi_a10_, n10_root_;
    mutable std::vector<Level> levels_;
    mutable int settled_level_ = 0;
};

/// Sigma(t) under the feedback induced by the Riccati flow from Pi0:
/// quadrature form of the covariance solution. Sigma0 may be singular.
Eigen::MatrixXd propagate_covariance(const PropagationCache& cache, const Eigen::MatrixXd& pi0,
                                     const Eigen::MatrixXd& sigma0, double t);

/// f(Pi0) through a one-off workspace.
Eigen::MatrixXd boundary_map(const PropagationCache& cache, const Eigen::MatrixXd& sigma0,
                             const Eigen::MatrixXd& pi0);

/// Analytic Jacobian through a one-off workspace.
Eigen::MatrixXd boundary_map_jacobian(const PropagationCache& cache,
                                      const Eigen::MatrixXd& sigma0,
                                      const Eigen::MatrixXd& pi0);

struct SolverIterate {
    Eigen::MatrixXd pi0;
    double residual;
    double step_scale;  // damping of the step that produced this iterate
};

struct SolverTrace {
    std::vector<SolverIterate> iterates;
    bool converged = false;
    double jacobian_condition = 0.0;
    bool homotopy_used = false;
    int homotopy_stages = 0;
};

struct SolverOptions {
    double tolerance = 1e-10;         // relative residual in Frobenius norm
    int max_iterations = 60;          // per Newton stage
    bool enable_homotopy = true;
    double feasibility_margin = 1e-10;
};

struct Pi0Solution {
    Eigen::MatrixXd pi0;
    SolverTrace trace;
};

/// Solver failure carrying the iteration history.
class SolverFailure : public SolverError {
  public:
    SolverFailure(const std::string& msg, SolverTrace trace)
        : SolverError(msg), trace(std::move(trace)) {}
    SolverTrace trace;
};

/// Newton inversion of the boundary map: finds the symmetric Pi0 with
/// f(Pi0) = Sigma1. Warm-started from the matched-channel closed form on a
/// trace-scaled surrogate kernel; falls back to kernel continuation when a
/// Newton stage stalls.
Pi0Solution solve_pi0(const PropagationCache& cache, const SteeringProblem& problem,
                      const SolverOptions& options = {});

/// Closed-form Pi(0) for matched channels, C D C^T = B R^{-1} B^T
/// (verified on the cache grid to 1e-9). Both covariances must be positive
/// definite.
Eigen::MatrixXd closed_form_pi0(const PropagationCache& cache, const Eigen::MatrixXd& sigma0,
                                const Eigen::MatrixXd& sigma1);

/// Closed form for a kernel equal to scale * B R^{-1} B^T; scale = 1 is the
/// matched-channel case and scale = 0 the noise-free case. Used as the
/// Newton warm start.
Eigen::MatrixXd closed_form_pi0_scaled(const PropagationCache& cache,
                                       const Eigen::MatrixXd& sigma0,
                                       const Eigen::MatrixXd& sigma1, double scale);

/// integral tr(C D C^T) dt / integral tr(B R^{-1} B^T) dt.
double kernel_scale(const PropagationCache& cache);

/// Supremum of terminal variances reachable from sigma0 = 0 in the scalar
/// problem. `Finite` carries the extrapolated limit; `Infinite` is declared
/// when c(0)^2 d(0) > 0 or when the partial integrals keep growing without
/// Cauchy decay; integrands that fail the Cauchy test but still show
/// decaying increments are reported as `Undetermined` rather than guessed.
enum class EtaKind { Finite, Infinite, Undetermined };
struct EtaResult {
    EtaKind kind;
    double value;  // limit when Finite, last partial integral otherwise
    std::array<double, 4> partial_integrals;
    bool is_finite() const { return kind == EtaKind::Finite; }
};
EtaResult eta(const PropagationCache& cache);

/// Monotone bisection for the scalar problem (sigma0 = 0 allowed). Throws
/// InfeasibleError when sigma0 = 0 and sigma1 is at or above the reachable
/// supremum eta.
double solve_pi0_scalar(const PropagationCache& cache, double sigma0, double sigma1,
                        double tolerance = 1e-10);

}  // namespace covsteer
