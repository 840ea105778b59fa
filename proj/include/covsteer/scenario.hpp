#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "covsteer/montecarlo.hpp"
#include "covsteer/steering.hpp"
#include "covsteer/system.hpp"

namespace covsteer {

struct SolverConfig {
    double tolerance = 1e-10;
    int max_iterations = 60;
    bool homotopy = true;
    std::size_t gain_grid = 1001;
    SolverOptions to_options() const;
};

struct SimulationConfig {
    long paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 20240817;
    int keep_paths = 10;
    int batches = 20;
    mc::SimulationOptions to_options() const;
};

struct OutputConfig {
    std::string directory = "out";
    bool emit_pi = false;
    bool emit_gains = true;
    bool emit_paths = true;
};

/// A complete run description: system + noise + boundary data + solver and
/// simulation settings. Parses from and re-emits to JSON losslessly.
struct Scenario {
    std::string name;
    LtvSystem system;
    SteeringProblem problem;
    SolverConfig solver;
    SimulationConfig simulation;
    OutputConfig output;

    static Scenario from_json(const nlohmann::json& j);
    static Scenario from_file(const std::string& path);
    nlohmann::json to_json() const;

  private:
    static Scenario from_json_checked(const nlohmann::json& j);
};

/// Built-in scenarios reproducing the two bundled studies: scalar
/// population steering under epidemic shocks (example1) and vertical
/// hover of a small vehicle in rain (example2).
Scenario example1_scenario();
Scenario example2_scenario();
std::optional<Scenario> builtin_scenario(const std::string& name);

nlohmann::json schedule_to_json(const MatrixSchedule& schedule);
MatrixSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace covsteer
