// covsteer: scenario-driven covariance steering pipeline.
//
// Subcommands: check (controllability diagnostics), solve (gain synthesis),
// simulate (closed-loop jump-diffusion Monte Carlo), reproduce (built-in
// studies end to end). Exit codes: 0 success, 2 validation error, 3 solver
// non-convergence, 4 simulation error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "covsteer/controller.hpp"
#include "covsteer/errors.hpp"
#include "covsteer/linalg.hpp"
#include "covsteer/montecarlo.hpp"
#include "covsteer/propagation.hpp"
#include "covsteer/riccati.hpp"
#include "covsteer/scenario.hpp"
#include "covsteer/steering.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace covsteer;

namespace {

std::string fmt(double x) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", x);
    return buffer;
}

class CsvWriter {
  public:
    explicit CsvWriter(const fs::path& path) : out_(path) {
        if (!out_) throw ValidationError("cannot open output file: " + path.string());
    }
    void header(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i)
            out_ << (i ? "," : "") << names[i];
        out_ << "\n";
    }
    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << fmt(values[i]);
        out_ << "\n";
    }

  private:
    std::ofstream out_;
};

json report_to_json(const ControllabilityReport& report) {
    json j;
    j["uniform"] = report.uniform;
    j["total_certified_on_grid"] = report.total;
    j["index_invariant"] = report.index_invariant;
    j["rank_tol"] = report.rank_tol;
    j["min_gramian_eigenvalue"] = report.min_gramian_eig;
    j["uniform_witnesses"] = report.uniform_witnesses;
    j["grid_points"] = report.grid.size();
    json ranks = json::array();
    for (std::size_t k = 0; k < report.grid.size(); ++k)
        ranks.push_back({{"t", report.grid[k]}, {"theta_ranks", report.theta_ranks[k]}});
    j["ranks"] = std::move(ranks);
    return j;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path.string());
    out << j.dump(2) << "\n";
}

ControllabilityReport run_check(const Scenario& scenario, const fs::path& out_dir,
                                bool quiet = false) {
    ValidationReport model = validate(scenario.system, uniform_grid(101));
    if (!model.ok())
        throw ValidationError("model validation failed:\n" + model.to_string());
    ValidationReport boundary = validate_problem(scenario.system, scenario.problem);
    if (!boundary.ok())
        throw ValidationError("problem validation failed:\n" + boundary.to_string());

    ControllabilityReport report =
        check_controllability(scenario.system, uniform_grid(101));
    if (!quiet) {
        std::cout << report.to_string();
        std::cout << report_to_json(report).dump() << "\n";
    }
    fs::create_directories(out_dir);
    write_json(out_dir / "check.json", report_to_json(report));
    return report;
}

struct SolveArtifacts {
    SynthesisResult synthesis;
    std::vector<Eigen::MatrixXd> sigma_traj;
    std::vector<Eigen::VectorXd> mu_traj;
    double expected_cost = 0.0;
};

SolveArtifacts run_solve(const Scenario& scenario, const fs::path& out_dir, bool emit_pi,
                         bool emit_gains) {
    fs::create_directories(out_dir);
    SolveArtifacts artifacts{
        synthesize(scenario.system, scenario.problem, scenario.solver.to_options(),
                   scenario.solver.gain_grid),
        {},
        {},
        0.0};
    const SynthesisResult& result = artifacts.synthesis;
    const std::vector<double>& grid = result.schedule.grid;

    PropagationCache cache(scenario.system);
    artifacts.sigma_traj.reserve(grid.size());
    for (double t : grid)
        artifacts.sigma_traj.push_back(
            propagate_covariance(cache, result.pi0, scenario.problem.sigma0, t));
    artifacts.mu_traj = mean_trajectory(scenario.system, result.schedule, scenario.problem.mu0);
    artifacts.expected_cost = expected_cost(scenario.system, result.schedule,
                                            artifacts.sigma_traj, artifacts.mu_traj);

    const Eigen::Index n = scenario.system.n(), p = scenario.system.p();
    if (emit_gains) {
        CsvWriter csv(out_dir / "gains.csv");
        std::vector<std::string> names{"t"};
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < p; ++i)
                names.push_back("K_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
        for (Eigen::Index i = 0; i < p; ++i) names.push_back("nu_" + std::to_string(i + 1));
        csv.header(names);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            std::vector<double> row{grid[k]};
            const Eigen::MatrixXd& gain = result.schedule.gains[k];
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < p; ++i) row.push_back(gain(i, j));
            for (Eigen::Index i = 0; i < p; ++i) row.push_back(result.schedule.feedforward[k](i));
            csv.row(row);
        }
    }
    if (emit_pi) {
        CsvWriter csv(out_dir / "pi.csv");
        std::vector<std::string> names{"t"};
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                names.push_back("Pi_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
        csv.header(names);
        for (double t : grid) {
            Eigen::MatrixXd pi_t = pi_at(cache, result.pi0, 0.0, t);
            std::vector<double> row{t};
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < n; ++i) row.push_back(pi_t(i, j));
            csv.row(row);
        }
    }

    BoundaryMap map(cache, scenario.problem.sigma0);
    double residual = (map.evaluate(result.pi0) - scenario.problem.sigma1).norm();
    json trace = json::array();
    for (const auto& iterate : result.trace.iterates)
        trace.push_back({{"residual", iterate.residual}, {"step_scale", iterate.step_scale}});
    json j;
    j["pi0"] = matrix_json(result.pi0);
    j["residual"] = residual;
    j["converged"] = result.trace.converged;
    j["iterations"] = result.trace.iterates.size();
    j["homotopy_used"] = result.trace.homotopy_used;
    j["homotopy_stages"] = result.trace.homotopy_stages;
    j["jacobian_condition"] = result.trace.jacobian_condition;
    j["expected_cost"] = artifacts.expected_cost;
    j["trace"] = std::move(trace);
    write_json(out_dir / "solve.json", j);
    std::cout << "pi0 residual " << fmt(residual) << ", expected cost "
              << fmt(artifacts.expected_cost) << "\n";
    return artifacts;
}

void run_simulate(const Scenario& scenario, const SolveArtifacts& artifacts,
                  const fs::path& out_dir) {
    if (scenario.simulation.paths < 2)
        throw ValidationError("moment output needs at least two simulation paths");
    fs::create_directories(out_dir);
    mc::PathEnsemble ensemble = mc::simulate(scenario.system, artifacts.synthesis.schedule,
                                             scenario.problem,
                                             scenario.simulation.to_options());
    const Eigen::Index n = scenario.system.n();

    {
        CsvWriter csv(out_dir / "moments.csv");
        std::vector<std::string> names{"t"};
        for (Eigen::Index i = 0; i < n; ++i) names.push_back("mean_" + std::to_string(i + 1));
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                names.push_back("cov_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
        for (Eigen::Index i = 0; i < n; ++i)
            names.push_back("band_lo_" + std::to_string(i + 1));
        for (Eigen::Index i = 0; i < n; ++i)
            names.push_back("band_hi_" + std::to_string(i + 1));
        csv.header(names);
        for (std::size_t k = 0; k < ensemble.time_grid.size(); ++k) {
            mc::MomentStats stats = ensemble.combined(k);
            Eigen::MatrixXd cov = stats.covariance();
            std::vector<double> row{ensemble.time_grid[k]};
            for (Eigen::Index i = 0; i < n; ++i) row.push_back(stats.mean(i));
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < n; ++i) row.push_back(cov(i, j));
            for (Eigen::Index i = 0; i < n; ++i)
                row.push_back(stats.mean(i) - 3.0 * std::sqrt(std::max(0.0, cov(i, i))));
            for (Eigen::Index i = 0; i < n; ++i)
                row.push_back(stats.mean(i) + 3.0 * std::sqrt(std::max(0.0, cov(i, i))));
            csv.row(row);
        }
    }
    if (scenario.output.emit_paths && !ensemble.kept_states.empty()) {
        CsvWriter csv(out_dir / "paths.csv");
        std::vector<std::string> names{"t", "path"};
        for (Eigen::Index i = 0; i < n; ++i) names.push_back("x_" + std::to_string(i + 1));
        csv.header(names);
        for (std::size_t k = 0; k < ensemble.time_grid.size(); ++k)
            for (std::size_t path = 0; path < ensemble.kept_states.size(); ++path) {
                std::vector<double> row{ensemble.time_grid[k], static_cast<double>(path)};
                const Eigen::VectorXd& x = ensemble.kept_states[path][k];
                for (Eigen::Index i = 0; i < n; ++i) row.push_back(x(i));
                csv.row(row);
            }
    }

    auto [mean1, cov1] = mc::empirical_moments(ensemble, 1.0);
    json j;
    j["paths"] = ensemble.n_paths;
    j["dt"] = ensemble.dt;
    j["seed"] = scenario.simulation.seed;
    j["terminal_mean"] = matrix_json(mean1.transpose());
    j["terminal_covariance"] = matrix_json(cov1);
    if (ensemble.batch_errors_available()) {
        j["terminal_mean_se"] = matrix_json(ensemble.mean_standard_error(1.0).transpose());
        j["terminal_covariance_se"] = matrix_json(ensemble.covariance_standard_error(1.0));
    }
    j["target_mean"] = matrix_json(scenario.problem.mu1.transpose());
    j["target_covariance"] = matrix_json(scenario.problem.sigma1);
    j["mc_cost_mean"] = ensemble.cost_mean();
    j["mc_cost_se"] = ensemble.cost_standard_error();
    j["expected_cost"] = artifacts.expected_cost;
    write_json(out_dir / "summary.json", j);
    std::cout << "terminal mean [" << mean1.transpose() << "], covariance diag ["
              << cov1.diagonal().transpose() << "]\n";
}

Scenario load_scenario(const std::string& source) {
    if (auto builtin = builtin_scenario(source)) return *builtin;
    return Scenario::from_file(source);
}

void apply_overrides(Scenario& scenario, long paths, double dt, long long seed,
                     const std::string& out) {
    if (paths > 0) scenario.simulation.paths = paths;
    if (dt > 0.0) scenario.simulation.dt = dt;
    if (seed >= 0) scenario.simulation.seed = static_cast<std::uint64_t>(seed);
    if (!out.empty()) scenario.output.directory = out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-horizon optimal covariance steering for LTV jump-diffusion systems"};
    app.require_subcommand(1);

    std::string scenario_path, out_override;
    long paths_override = 0;
    double dt_override = 0.0;
    long long seed_override = -1;
    bool emit_pi = false, emit_gains_flag = false;

    auto add_common = [&](CLI::App* cmd, bool with_sim_flags) {
        cmd->add_option("--out", out_override, "output directory override");
        if (with_sim_flags) {
            cmd->add_option("--paths", paths_override, "Monte Carlo path count");
            cmd->add_option("--dt", dt_override, "simulation step (<= 1e-3)");
            cmd->add_option("--seed", seed_override, "master RNG seed");
        }
    };

    CLI::App* check_cmd = app.add_subcommand("check", "controllability diagnostics");
    check_cmd->add_option("scenario", scenario_path, "scenario file or builtin name")
        ->required();
    add_common(check_cmd, false);

    CLI::App* solve_cmd = app.add_subcommand("solve", "synthesize the optimal gain schedule");
    solve_cmd->add_option("scenario", scenario_path, "scenario file or builtin name")
        ->required();
    solve_cmd->add_flag("--emit-pi", emit_pi, "write the Riccati trajectory CSV");
    solve_cmd->add_flag("--emit-gains", emit_gains_flag, "write the gain schedule CSV");
    add_common(solve_cmd, false);

    CLI::App* sim_cmd = app.add_subcommand("simulate", "full pipeline with Monte Carlo");
    sim_cmd->add_option("scenario", scenario_path, "scenario file or builtin name")->required();
    add_common(sim_cmd, true);

    CLI::App* repro_cmd =
        app.add_subcommand("reproduce", "run a built-in study end to end");
    repro_cmd->add_option("which", scenario_path, "example1 or example2")->required();
    add_common(repro_cmd, true);

    CLI11_PARSE(app, argc, argv);

    try {
        Scenario scenario = load_scenario(scenario_path);
        apply_overrides(scenario, paths_override, dt_override, seed_override, out_override);
        fs::path out_dir(scenario.output.directory);

        if (app.got_subcommand(check_cmd)) {
            ControllabilityReport report = run_check(scenario, out_dir);
            return report.total ? 0 : 1;
        }
        if (app.got_subcommand(solve_cmd)) {
            ControllabilityReport report = run_check(scenario, out_dir, /*quiet=*/true);
            if (!report.total)
                throw ValidationError("total controllability not certified; aborting solve");
            bool emit_gains = emit_gains_flag || scenario.output.emit_gains;
            run_solve(scenario, out_dir, emit_pi || scenario.output.emit_pi, emit_gains);
            return 0;
        }
        if (app.got_subcommand(sim_cmd) || app.got_subcommand(repro_cmd)) {
            if (app.got_subcommand(repro_cmd) && !builtin_scenario(scenario_path))
                throw ValidationError("unknown study name: " + scenario_path +
                                      " (expected example1 or example2)");
            fs::create_directories(out_dir);
            write_json(out_dir / (scenario.name.empty() ? "scenario.json"
                                                        : scenario.name + ".scenario.json"),
                       scenario.to_json());
            ControllabilityReport report = run_check(scenario, out_dir, /*quiet=*/true);
            if (!report.total)
                throw ValidationError("total controllability not certified; aborting");
            SolveArtifacts artifacts =
                run_solve(scenario, out_dir, scenario.output.emit_pi, true);
            run_simulate(scenario, artifacts, out_dir);
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
