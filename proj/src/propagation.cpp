#include "covsteer/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"

namespace covsteer {

namespace {

constexpr std::size_t kGridPoints = 1001;
constexpr double kGramianEigFloor = 1e-12;

}  // namespace

PropagationCache::PropagationCache(LtvSystem system, const ode::Options& options)
    : system_(std::make_shared<const LtvSystem>(std::move(system))) {
    const Eigen::Index n = system_->n();
    const auto nn = static_cast<Eigen::Index>(n * n);
    auto rhs = [this, n, nn](double t, const Eigen::VectorXd& y) {
        Eigen::Map<const Eigen::MatrixXd> phi(y.data(), n, n);
        Eigen::Map<const Eigen::MatrixXd> xi(y.data() + nn, n, n);
        Eigen::MatrixXd a = system_->a().value(t);
        Eigen::MatrixXd bn = system_->b_normalized(t);
        Eigen::MatrixXd xb = xi * bn;
        Eigen::VectorXd dy(3 * nn);
        Eigen::Map<Eigen::MatrixXd>(dy.data(), n, n) = a * phi;
        Eigen::Map<Eigen::MatrixXd>(dy.data() + nn, n, n) = -xi * a;
        Eigen::Map<Eigen::MatrixXd>(dy.data() + 2 * nn, n, n) = xb * xb.transpose();
        return dy;
    };
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(3 * nn);
    Eigen::Map<Eigen::MatrixXd>(y0.data(), n, n).setIdentity();
    Eigen::Map<Eigen::MatrixXd>(y0.data() + nn, n, n).setIdentity();
    dense_ = ode::integrate(rhs, 0.0, 1.0, std::move(y0), options);
    grid_ = uniform_grid(kGridPoints);
}

Eigen::MatrixXd PropagationCache::phi(double t) const {
    const Eigen::Index n = dim();
    Eigen::VectorXd y = dense_.eval(t);
    return Eigen::Map<const Eigen::MatrixXd>(y.data(), n, n);
}

Eigen::MatrixXd PropagationCache::phi_inverse(double t) const {
    const Eigen::Index n = dim();
    Eigen::VectorXd y = dense_.eval(t);
    return Eigen::Map<const Eigen::MatrixXd>(y.data() + n * n, n, n);
}

Eigen::MatrixXd PropagationCache::gramian_base(double t) const {
    const Eigen::Index n = dim();
    Eigen::VectorXd y = dense_.eval(t);
    return linalg::symmetrize(Eigen::Map<const Eigen::MatrixXd>(y.data() + 2 * n * n, n, n));
}

Eigen::MatrixXd PropagationCache::transition(double t, double s) const {
    if (t == s) return Eigen::MatrixXd::Identity(dim(), dim());
    return phi(t) * phi_inverse(s);
}

Eigen::MatrixXd PropagationCache::gramian(double t1, double t0) const {
    if (t1 == t0) return Eigen::MatrixXd::Zero(dim(), dim());
    Eigen::MatrixXd p0 = phi(t0);
    return linalg::symmetrize(p0 * (gramian_base(t1) - gramian_base(t0)) * p0.transpose());
}

Eigen::MatrixXd transition(const LtvSystem& system, double t, double s) {
    return PropagationCache(system).transition(t, s);
}

Eigen::MatrixXd gramian(const LtvSystem& system, double t1, double t0) {
    if (t0 < 0.0 || t1 > 1.0 || t0 > t1)
        throw ValidationError("gramian requires 0 <= t0 <= t1 <= 1");
    return PropagationCache(system).gramian(t1, t0);
}

double GramianTable::min_eigenvalue() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) m = std::min(m, e.min_eigenvalue);
    return m;
}

GramianTable gramian_table(const PropagationCache& cache, const std::vector<double>& anchors) {
    GramianTable table;
    for (std::size_t i = 0; i < anchors.size(); ++i)
        for (std::size_t j = i + 1; j < anchors.size(); ++j) {
            double s = anchors[i], t = anchors[j];
            table.entries.push_back({s, t, linalg::min_eigenvalue(cache.gramian(t, s))});
        }
    return table;
}

namespace {

// Memoized d-th time derivative of Gamma_k at a fixed t:
//   Gamma_0^{(d)} = B^{(d)}
//   Gamma_k^{(d)} = -sum_j binom(d, j) A^{(j)} Gamma_{k-1}^{(d-j)} + Gamma_{k-1}^{(d+1)}
class GammaEvaluator {
  public:
    GammaEvaluator(const LtvSystem& system, double t) : system_(system), t_(t) {}

    const Eigen::MatrixXd& gamma(int k, int d) {
        auto key = std::make_pair(k, d);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        Eigen::MatrixXd value;
        if (k == 0) {
            value = schedule_derivative(system_.b(), d, "B");
        } else {
            value = gamma(k - 1, d + 1);
            double binom = 1.0;
            for (int j = 0; j <= d; ++j) {
                if (j > 0) binom = binom * (d - j + 1) / j;
                value -= binom * schedule_derivative(system_.a(), j, "A") * gamma(k - 1, d - j);
            }
        }
        return memo_.emplace(key, std::move(value)).first->second;
    }

  private:
    Eigen::MatrixXd schedule_derivative(const MatrixSchedule& sched, int order,
                                        const char* name) {
        if (order > sched.max_derivative_order())
            throw DerivativeOrderError(
                std::string("controllability recursion requires derivative order ") +
                    std::to_string(order) + " of " + name +
                    ", but the schedule provides at most order " +
                    std::to_string(sched.max_derivative_order()),
                order);
        return sched.derivative(t_, order);
    }

    const LtvSystem& system_;
    double t_;
    std::map<std::pair<int, int>, Eigen::MatrixXd> memo_;
};

}  // namespace

Eigen::MatrixXd controllability_matrix(const LtvSystem& system, double t, int blocks) {
    const Eigen::Index n = system.n(), p = system.p();
    GammaEvaluator eval(system, t);
    Eigen::MatrixXd theta(n, blocks * p);
    for (int k = 0; k < blocks; ++k) theta.middleCols(k * p, p) = eval.gamma(k, 0);
    return theta;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> controllability_matrices(const LtvSystem& system,
                                                                     double t) {
    const int n = static_cast<int>(system.n());
    Eigen::MatrixXd big = controllability_matrix(system, t, n + 1);
    return {big.leftCols(n * system.p()), big};
}

std::string ControllabilityReport::to_string() const {
    std::ostringstream os;
    os << "controllability on " << grid.size() << "-point grid (rank tol " << rank_tol << ")\n";
    os << "  uniform:         " << (uniform ? "true" : "false");
    if (!uniform && !uniform_witnesses.empty()) {
        os << "  (rank deficient at t =";
        std::size_t shown = 0;
        for (double t : uniform_witnesses) {
            os << " " << t;
            if (++shown == 5) {
                os << " ...";
                break;
            }
        }
        os << ")";
    }
    os << "\n  total:           " << (total ? "certified on grid" : "not certified") << "\n";
    os << "  index invariant: " << (index_invariant ? "true" : "false")
       << "  (certified up to rank tol)\n";
    os << "  min Gramian eigenvalue over sampled (s, t): " << min_gramian_eig << "\n";
    return os.str();
}

ControllabilityReport check_controllability(const LtvSystem& system,
                                            const std::vector<double>& grid, double rank_tol) {
    if (grid.size() < 11)
        throw ValidationError("controllability grid needs at least 11 points");
    const int n = static_cast<int>(system.n());

    ControllabilityReport report;
    report.grid = grid;
    report.rank_tol = rank_tol;
    report.theta_ranks.resize(grid.size());

    std::vector<bool> full_rank(grid.size(), false);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Eigen::MatrixXd big = controllability_matrix(system, grid[k], n + 1);
        auto& ranks = report.theta_ranks[k];
        ranks.resize(static_cast<std::size_t>(n) + 1);
        for (int i = 1; i <= n + 1; ++i)
            ranks[static_cast<std::size_t>(i - 1)] =
                linalg::rank_svd(big.leftCols(i * system.p()), rank_tol);
        full_rank[k] = ranks[static_cast<std::size_t>(n - 1)] == n;
        if (!full_rank[k]) report.uniform_witnesses.push_back(grid[k]);
    }
    report.uniform = report.uniform_witnesses.empty();

    // Index invariance: each Theta_i keeps a constant rank across the grid
    // and rank Theta_n == rank Theta_{n+1}.
    report.index_invariant = true;
    for (int i = 0; i <= n; ++i)
        for (std::size_t k = 1; k < grid.size(); ++k)
            if (report.theta_ranks[k][static_cast<std::size_t>(i)] !=
                report.theta_ranks[0][static_cast<std::size_t>(i)])
                report.index_invariant = false;
    if (report.theta_ranks[0][static_cast<std::size_t>(n - 1)] !=
        report.theta_ranks[0][static_cast<std::size_t>(n)])
        report.index_invariant = false;

    // Total controllability, grid certificate part 1: every closed window
    // [g_k, g_{k+1}] must contain a full-rank grid point (full rank is an
    // open condition, so an endpoint hit certifies the open interval too).
    // Equivalently: no two adjacent deficient grid points.
    bool windows_ok = true;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k)
        if (!full_rank[k] && !full_rank[k + 1]) windows_ok = false;

    // Part 2: positive definiteness of N(t, s) on a coarse triangular sample.
    PropagationCache cache(system);
    std::vector<double> anchors;
    std::size_t stride = std::max<std::size_t>(1, grid.size() / 10);
    for (std::size_t k = 0; k < grid.size(); k += stride) anchors.push_back(grid[k]);
    if (anchors.back() != grid.back()) anchors.push_back(grid.back());
    report.gramian_samples = gramian_table(cache, anchors);
    report.min_gramian_eig = report.gramian_samples.min_eigenvalue();

    report.total = windows_ok && report.min_gramian_eig > kGramianEigFloor;
    return report;
}

}  // namespace covsteer
