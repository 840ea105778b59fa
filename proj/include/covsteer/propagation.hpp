#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "covsteer/ode.hpp"
#include "covsteer/system.hpp"

namespace covsteer {

/// One integration pass over [0, 1] of the joint system
///
///   Phi' = A(t) Phi,     Phi(0) = I        (state transition from 0)
///   Xi'  = -Xi A(t),     Xi(0)  = I        (its inverse)
///   W'   = Xi Bn Bn^T Xi^T,  W(0) = 0      (Gramian seed, Bn = B R^{-1/2})
///
/// cached with dense output. Every transition matrix and controllability
/// Gramian over any (s, t) pair is then available without re-integration:
///
///   Phi_A(t, s) = Phi(t) Xi(s)
///   N(t, s)     = Phi(s) (W(t) - W(s)) Phi(s)^T   (signed for t < s)
class PropagationCache {
  public:
    /// Default integration tolerances are tighter than elsewhere: every
    /// closed-form identity downstream telescopes through these factors, so
    /// their error budget has to sit well below the 1e-8 comparisons made
    /// against them.
    static ode::Options default_options() {
        ode::Options options;
        options.abs_tol = 1e-12;
        options.rel_tol = 1e-10;
        return options;
    }

    explicit PropagationCache(LtvSystem system,
                              const ode::Options& options = default_options());

    const LtvSystem& system() const { return *system_; }
    Eigen::Index dim() const { return system_->n(); }

    Eigen::MatrixXd phi(double t) const;          // Phi_A(t, 0)
    Eigen::MatrixXd phi_inverse(double t) const;  // Phi_A(0, t)
    Eigen::MatrixXd gramian_base(double t) const; // W(t) = N(t, 0)

    Eigen::MatrixXd transition(double t, double s) const;
    Eigen::MatrixXd gramian(double t1, double t0) const;

    /// Samples of phi/gramian_base on the 1001-point uniform grid.
    const std::vector<double>& grid() const { return grid_; }

  private:
    std::shared_ptr<const LtvSystem> system_;
    ode::DenseSolution dense_;
    std::vector<double> grid_;
};

/// Phi_A(t, s) by one-off integration (builds a cache internally).
Eigen::MatrixXd transition(const LtvSystem& system, double t, double s);

/// Controllability Gramian N(t1, t0) by one-off integration.
Eigen::MatrixXd gramian(const LtvSystem& system, double t1, double t0);

/// Triangular table of Gramian spectra used by the total-controllability
/// certificate and by invariant tests.
struct GramianTable {
    struct Entry {
        double s, t;
        double min_eigenvalue;
    };
    std::vector<Entry> entries;
    double min_eigenvalue() const;
};
GramianTable gramian_table(const PropagationCache& cache, const std::vector<double>& anchors);

/// Stacked blocks [Gamma_0 ... Gamma_{i-1}](t) of the controllability
/// matrix recursion Gamma_0 = B, Gamma_k = -A Gamma_{k-1} + Gamma_{k-1}'.
/// Needs derivatives of A up to order i-2 and of B up to order i-1.
Eigen::MatrixXd controllability_matrix(const LtvSystem& system, double t, int blocks);

/// Theta_n(t) and Theta_{n+1}(t).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> controllability_matrices(const LtvSystem& system,
                                                                     double t);

struct ControllabilityReport {
    std::vector<double> grid;
    // ranks[k][i-1] = rank of Theta_i at grid[k], i = 1..n+1
    std::vector<std::vector<Eigen::Index>> theta_ranks;
    bool uniform = false;
    bool total = false;
    bool index_invariant = false;
    std::vector<double> uniform_witnesses;  // grid times with rank Theta_n < n
    double min_gramian_eig = 0.0;
    GramianTable gramian_samples;
    double rank_tol = 0.0;
    std::string to_string() const;
};

/// Certifies uniform/total controllability and index invariance on a grid
/// (>= 11 points). Total controllability is certified numerically: every
/// two-step window of the grid must contain a full-rank point and all
/// sampled Gramians must have smallest eigenvalue above 1e-12.
ControllabilityReport check_controllability(const LtvSystem& system,
                                            const std::vector<double>& grid,
                                            double rank_tol = 1e-9);

}  // namespace covsteer
