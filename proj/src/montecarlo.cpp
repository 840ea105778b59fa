#include "covsteer/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"
#include "covsteer/ode.hpp"

namespace covsteer::mc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t master, long path_index) {
    return splitmix64(splitmix64(master) ^ splitmix64(static_cast<std::uint64_t>(path_index) + 1));
}

int resolve_threads(int requested) {
    int threads = requested;
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads <= 0) threads = 1;
        if (const char* cap = std::getenv("COVSTEER_THREADS")) {
            int parsed = std::atoi(cap);
            if (parsed > 0) threads = std::min(threads, parsed);
        }
    }
    return std::max(1, threads);
}

struct JumpChannel {
    const MatrixSchedule* rates;
    const JumpLaw* law;
    int channel;
    double envelope;  // sup of the rate over [0, 1]
};

}  // namespace

void MomentStats::init(Eigen::Index n) {
    count = 0;
    mean = Eigen::VectorXd::Zero(n);
    comoment = Eigen::MatrixXd::Zero(n, n);
}

void MomentStats::update(const Eigen::VectorXd& x) {
    ++count;
    Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(count);
    comoment += delta * (x - mean).transpose();
}

void MomentStats::combine(const MomentStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
        *this = other;
        return;
    }
    double na = static_cast<double>(count), nb = static_cast<double>(other.count);
    Eigen::VectorXd delta = other.mean - mean;
    mean = (na * mean + nb * other.mean) / (na + nb);
    comoment += other.comoment + (na * nb / (na + nb)) * delta * delta.transpose();
    count += other.count;
}

Eigen::MatrixXd MomentStats::covariance() const {
    if (count < 2) throw ValidationError("covariance needs at least two paths");
    return linalg::symmetrize(comoment / static_cast<double>(count - 1));
}

void ScalarStats::update(double x) {
    ++count;
    double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
}

void ScalarStats::combine(const ScalarStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
        *this = other;
        return;
    }
    double na = static_cast<double>(count), nb = static_cast<double>(other.count);
    double delta = other.mean - mean;
    mean = (na * mean + nb * other.mean) / (na + nb);
    m2 += other.m2 + (na * nb / (na + nb)) * delta * delta;
    count += other.count;
}

double ScalarStats::variance() const {
    return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1);
}

std::size_t PathEnsemble::step_index(double t) const {
    double pos = t / dt;
    auto idx = static_cast<long>(std::llround(pos));
    if (idx < 0 || idx >= static_cast<long>(time_grid.size()) ||
        std::abs(pos - static_cast<double>(idx)) > 1e-9)
        throw ValidationError("moment query time " + std::to_string(t) +
                              " is not on the step grid");
    return static_cast<std::size_t>(idx);
}

bool PathEnsemble::batch_errors_available() const {
    if (batch_stats.size() < 2) return false;
    for (const auto& batch : batch_stats)
        if (batch.empty() || batch[0].count < 2) return false;
    return true;
}

MomentStats PathEnsemble::combined(std::size_t step) const {
    MomentStats total;
    for (const auto& batch : batch_stats) total.combine(batch[step]);
    return total;
}

Eigen::VectorXd PathEnsemble::mean_at(double t) const { return combined(step_index(t)).mean; }

Eigen::MatrixXd PathEnsemble::covariance_at(double t) const {
    return combined(step_index(t)).covariance();
}

Eigen::VectorXd PathEnsemble::mean_standard_error(double t) const {
    std::size_t step = step_index(t);
    const std::size_t n_batches = batch_stats.size();
    Eigen::VectorXd acc_mean = Eigen::VectorXd::Zero(batch_stats[0][step].mean.size());
    for (const auto& batch : batch_stats) acc_mean += batch[step].mean;
    acc_mean /= static_cast<double>(n_batches);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(acc_mean.size());
    for (const auto& batch : batch_stats)
        var += (batch[step].mean - acc_mean).cwiseAbs2();
    var /= static_cast<double>(n_batches - 1);
    return (var / static_cast<double>(n_batches)).cwiseSqrt();
}

Eigen::MatrixXd PathEnsemble::covariance_standard_error(double t) const {
    std::size_t step = step_index(t);
    const std::size_t n_batches = batch_stats.size();
    const Eigen::Index n = batch_stats[0][step].mean.size();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::MatrixXd> covs;
    covs.reserve(n_batches);
    for (const auto& batch : batch_stats) {
        covs.push_back(batch[step].covariance());
        acc += covs.back();
    }
    acc /= static_cast<double>(n_batches);
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(n, n);
    for (const auto& cov : covs) var += (cov - acc).cwiseAbs2();
    var /= static_cast<double>(n_batches - 1);
    return (var / static_cast<double>(n_batches)).cwiseSqrt();
}

double PathEnsemble::cost_mean() const {
    ScalarStats total;
    for (const auto& batch : batch_costs) total.combine(batch);
    return total.mean;
}

double PathEnsemble::cost_standard_error() const {
    const std::size_t n_batches = batch_costs.size();
    double acc = 0.0;
    for (const auto& batch : batch_costs) acc += batch.mean;
    acc /= static_cast<double>(n_batches);
    double var = 0.0;
    for (const auto& batch : batch_costs) var += (batch.mean - acc) * (batch.mean - acc);
    var /= static_cast<double>(n_batches - 1);
    return std::sqrt(var / static_cast<double>(n_batches));
}

PathEnsemble simulate(const LtvSystem& system, const GainSchedule& schedule,
                      const SteeringProblem& problem, const SimulationOptions& options) {
    const Eigen::Index n = system.n();
    const Eigen::Index q = system.q();
    if (options.dt > 1e-3 + 1e-15 || options.dt <= 0.0)
        throw ValidationError("simulation step must satisfy 0 < dt <= 1e-3");
    if (options.n_paths < 1) throw ValidationError("need at least one path");
    if (options.batches < 2) throw ValidationError("need at least two batches");
    {
        ValidationReport report = validate_problem(system, problem);
        if (!report.ok())
            throw ValidationError("invalid simulation boundary data:\n" + report.to_string());
    }

    const auto n_steps = static_cast<std::size_t>(std::ceil(1.0 / options.dt - 1e-12));
    PathEnsemble ensemble;
    ensemble.n_paths = options.n_paths;
    ensemble.dt = options.dt;
    ensemble.time_grid.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k)
        ensemble.time_grid[k] = std::min(1.0, static_cast<double>(k) * options.dt);

    // Precompute per-step coefficient samples shared by every path.
    struct StepData {
        Eigen::MatrixXd a, b, c, k_gain, r;
        Eigen::VectorXd nu;
        std::vector<Eigen::MatrixXd> wiener;  // scale per Wiener-like component
    };
    std::vector<StepData> steps(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
        double t = ensemble.time_grid[k];
        StepData& sd = steps[k];
        sd.a = system.a().value(t);
        sd.b = system.b().value(t);
        sd.c = system.c().value(t);
        sd.r = system.r().value(t);
        sd.k_gain = schedule.gain_at(t);
        sd.nu = schedule.feedforward_at(t);
        for (const auto& comp : system.noise().components()) {
            if (const auto* w = std::get_if<WienerComponent>(&comp)) {
                sd.wiener.push_back(w->scale);
            } else if (const auto* pre = std::get_if<PrecomputedComponent>(&comp)) {
                sd.wiener.push_back(linalg::sqrt_psd(pre->intensity.value(t)));
            }
        }
    }

    // Jump channels with their thinning envelopes (rate suprema on a dense
    // grid; exactness only needs the envelope to dominate, checked at
    // acceptance time below).
    std::vector<JumpChannel> jump_channels;
    for (const auto& comp : system.noise().components()) {
        if (const auto* cp = std::get_if<CompoundPoissonComponent>(&comp)) {
            for (Eigen::Index ch = 0; ch < q; ++ch) {
                double sup = 0.0;
                for (std::size_t k = 0; k <= 1000; ++k) {
                    double rate = cp->rates.value(static_cast<double>(k) / 1000.0)(ch, 0);
                    if (rate < 0.0)
                        throw ValidationError("compound Poisson rate is negative");
                    if (!std::isfinite(rate))
                        throw SimulationError("jump rate schedule is unbounded");
                    sup = std::max(sup, rate);
                }
                if (sup > 1e9) throw SimulationError("jump rate schedule is unbounded");
                if (sup == 0.0) continue;
                jump_channels.push_back({&cp->rates, &cp->laws[static_cast<std::size_t>(ch)],
                                         static_cast<int>(ch), sup * (1.0 + 1e-9)});
            }
        }
    }

    Eigen::MatrixXd sigma0_root = linalg::sqrt_psd(problem.sigma0);

    // keep at least two paths per batch so batch-mean errors stay defined
    const int batches = static_cast<int>(
        std::max<long>(2, std::min<long>(options.batches, options.n_paths / 2)));
    const long per_batch = (options.n_paths + batches - 1) / batches;
    const long keep = std::min<long>(options.keep_paths, options.n_paths);

    ensemble.kept_states.resize(static_cast<std::size_t>(keep));
    ensemble.kept_jumps.resize(static_cast<std::size_t>(keep));
    ensemble.seeds.resize(static_cast<std::size_t>(options.n_paths));
    ensemble.jump_counts.resize(static_cast<std::size_t>(options.n_paths));
    ensemble.batch_stats.assign(static_cast<std::size_t>(batches), {});
    ensemble.batch_costs.assign(static_cast<std::size_t>(batches), {});

    auto run_batch = [&](int batch) {
        long first = static_cast<long>(batch) * per_batch;
        long last = std::min(options.n_paths, first + per_batch);
        auto& stats = ensemble.batch_stats[static_cast<std::size_t>(batch)];
        stats.resize(n_steps + 1);
        for (auto& s : stats) s.init(n);
        auto& cost_stats = ensemble.batch_costs[static_cast<std::size_t>(batch)];

        std::vector<JumpEvent> path_jumps;
        for (long path = first; path < last; ++path) {
            std::uint64_t seed = path_seed(options.seed, path);
            ensemble.seeds[static_cast<std::size_t>(path)] = seed;
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::exponential_distribution<double> expo(1.0);
            std::uniform_real_distribution<double> unif(0.0, 1.0);

            // Initial state from N(mu0, Sigma0) via the symmetric root.
            Eigen::VectorXd x = problem.mu0;
            for (Eigen::Index i = 0; i < n; ++i) x += sigma0_root.col(i) * gauss(rng);

            // Exact jump times per channel by thinning, then merged in time.
            path_jumps.clear();
            for (const auto& channel : jump_channels) {
                double t = 0.0;
                while (true) {
                    t += expo(rng) / channel.envelope;
                    if (t > 1.0) break;
                    double accept = channel.rates->value(t)(channel.channel, 0) /
                                    channel.envelope;
                    if (unif(rng) < accept)
                        path_jumps.push_back({t, channel.channel, channel.law->sample(rng)});
                }
            }
            std::stable_sort(path_jumps.begin(), path_jumps.end(),
                             [](const JumpEvent& a, const JumpEvent& b) {
                                 return a.time < b.time;
                             });
            ensemble.jump_counts[static_cast<std::size_t>(path)] =
                static_cast<std::uint32_t>(path_jumps.size());

            const bool keep_this = path < keep;
            if (keep_this) {
                auto& states = ensemble.kept_states[static_cast<std::size_t>(path)];
                states.clear();
                states.reserve(n_steps + 1);
                states.push_back(x);
                ensemble.kept_jumps[static_cast<std::size_t>(path)] = path_jumps;
            }
            stats[0].update(x);

            double cost = 0.0;
            std::size_t jump_cursor = 0;
            for (std::size_t k = 0; k < n_steps; ++k) {
                const StepData& sd = steps[k];
                double t0 = ensemble.time_grid[k];
                double t1 = ensemble.time_grid[k + 1];
                Eigen::VectorXd u0 = sd.k_gain * x + sd.nu;
                double u0_cost = u0.dot(sd.r * u0);

                double seg_start = t0;
                while (true) {
                    bool has_jump = jump_cursor < path_jumps.size() &&
                                    path_jumps[jump_cursor].time <= t1;
                    double seg_end = has_jump ? path_jumps[jump_cursor].time : t1;
                    double h = seg_end - seg_start;
                    if (h > 0.0) {
                        Eigen::VectorXd u = sd.k_gain * x + sd.nu;
                        Eigen::VectorXd drift = sd.a * x + sd.b * u;
                        Eigen::VectorXd noise = Eigen::VectorXd::Zero(n);
                        double root_h = std::sqrt(h);
                        for (const auto& scale : sd.wiener) {
                            Eigen::VectorXd z(q);
                            for (Eigen::Index i = 0; i < q; ++i) z(i) = gauss(rng);
                            noise += sd.c * (scale * z) * root_h;
                        }
                        x += h * drift + noise;
                    }
                    if (!has_jump) break;
                    const JumpEvent& event = path_jumps[jump_cursor];
                    x += system.c().value(event.time).col(event.channel) * event.size;
                    ++jump_cursor;
                    seg_start = seg_end;
                }

                Eigen::VectorXd u1 = steps[k + 1].k_gain * x + steps[k + 1].nu;
                cost += 0.5 * (t1 - t0) * (u0_cost + u1.dot(steps[k + 1].r * u1));
                if (keep_this)
                    ensemble.kept_states[static_cast<std::size_t>(path)].push_back(x);
                stats[k + 1].update(x);
            }
            cost_stats.update(cost);
        }
    };

    int threads = resolve_threads(options.threads);
    if (threads <= 1 || batches <= 1) {
        for (int batch = 0; batch < batches; ++batch) run_batch(batch);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        int workers = std::min(threads, batches);
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    int batch = next.fetch_add(1);
                    if (batch >= batches) return;
                    run_batch(batch);
                }
            });
        for (auto& worker : pool) worker.join();
    }
    return ensemble;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> empirical_moments(const PathEnsemble& ensemble,
                                                              double t) {
    MomentStats total = ensemble.combined(ensemble.step_index(t));
    return {total.mean, total.covariance()};
}

std::vector<Eigen::MatrixXd> covariance_ode(const LtvSystem& system,
                                            const GainSchedule& schedule,
                                            const Eigen::MatrixXd& sigma0,
                                            const std::vector<double>& out_grid) {
    const Eigen::Index n = system.n();
    auto rhs = [&](double t, const Eigen::VectorXd& y) -> Eigen::VectorXd {
        Eigen::MatrixXd sigma = linalg::unvec(y, n, n);
        Eigen::MatrixXd closed = system.a().value(t) + system.b().value(t) * schedule.dense_gain(t);
        Eigen::MatrixXd dsigma = closed * sigma + sigma * closed.transpose() +
                                 system.noise_kernel(t);
        return linalg::vec(dsigma);
    };
    ode::DenseSolution sol = ode::integrate(rhs, 0.0, 1.0, linalg::vec(sigma0));
    std::vector<Eigen::MatrixXd> out;
    out.reserve(out_grid.size());
    for (double t : out_grid) out.push_back(linalg::symmetrize(linalg::unvec(sol.eval(t), n, n)));
    return out;
}

}  // namespace covsteer::mc
