#include "covsteer/scenario.hpp"

#include <fstream>

#include "covsteer/errors.hpp"

namespace covsteer {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty())
        throw ValidationError("expected a matrix as an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw ValidationError("ragged matrix rows in scenario");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

json jump_law_to_json(const JumpLaw& law) {
    json j;
    switch (law.kind()) {
        case JumpLaw::Kind::Constant:
            j["type"] = "constant";
            j["value"] = law.param(0);
            break;
        case JumpLaw::Kind::Normal:
            j["type"] = "normal";
            j["mean"] = law.param(0);
            j["stddev"] = law.param(1);
            break;
        case JumpLaw::Kind::Exponential:
            j["type"] = "exponential";
            j["mean"] = law.param(0);
            break;
        case JumpLaw::Kind::TwoPoint:
            j["type"] = "two_point";
            j["value_a"] = law.param(0);
            j["prob_a"] = law.param(1);
            j["value_b"] = law.param(2);
            break;
    }
    return j;
}

JumpLaw jump_law_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant") return JumpLaw::constant(j.at("value").get<double>());
    if (type == "normal")
        return JumpLaw::normal(j.at("mean").get<double>(), j.at("stddev").get<double>());
    if (type == "exponential") return JumpLaw::exponential(j.at("mean").get<double>());
    if (type == "two_point")
        return JumpLaw::two_point(j.at("value_a").get<double>(), j.at("prob_a").get<double>(),
                                  j.at("value_b").get<double>());
    throw ValidationError("unknown jump law type: " + type);
}

json noise_to_json(const NoiseSpec& noise) {
    json components = json::array();
    for (const auto& comp : noise.components()) {
        json j;
        if (const auto* w = std::get_if<WienerComponent>(&comp)) {
            j["type"] = "wiener";
            j["scale"] = matrix_to_json(w->scale);
        } else if (const auto* cp = std::get_if<CompoundPoissonComponent>(&comp)) {
            j["type"] = "compound_poisson";
            j["rates"] = schedule_to_json(cp->rates);
            json laws = json::array();
            for (const auto& law : cp->laws) laws.push_back(jump_law_to_json(law));
            j["jump_laws"] = std::move(laws);
        } else if (const auto* pre = std::get_if<PrecomputedComponent>(&comp)) {
            j["type"] = "precomputed";
            j["intensity"] = schedule_to_json(pre->intensity);
        }
        components.push_back(std::move(j));
    }
    return json{{"channels", noise.channels()}, {"components", std::move(components)}};
}

NoiseSpec noise_from_json(const json& j) {
    const auto channels = j.at("channels").get<Eigen::Index>();
    std::vector<NoiseComponent> components;
    for (const json& comp : j.at("components")) {
        const std::string type = comp.at("type").get<std::string>();
        if (type == "wiener") {
            components.push_back(WienerComponent{matrix_from_json(comp.at("scale"))});
        } else if (type == "compound_poisson") {
            std::vector<JumpLaw> laws;
            for (const json& law : comp.at("jump_laws"))
                laws.push_back(jump_law_from_json(law));
            components.push_back(
                CompoundPoissonComponent{schedule_from_json(comp.at("rates")), std::move(laws)});
        } else if (type == "precomputed") {
            components.push_back(PrecomputedComponent{schedule_from_json(comp.at("intensity"))});
        } else {
            throw ValidationError("unknown noise component type: " + type);
        }
    }
    return NoiseSpec(channels, std::move(components));
}

}  // namespace

json schedule_to_json(const MatrixSchedule& schedule) {
    json j;
    switch (schedule.form()) {
        case MatrixSchedule::Form::Constant:
            j["form"] = "constant";
            j["value"] = matrix_to_json(schedule.constant_value());
            break;
        case MatrixSchedule::Form::Polynomial: {
            j["form"] = "polynomial";
            j["rows"] = schedule.rows();
            j["cols"] = schedule.cols();
            j["coeffs"] = schedule.poly_coeffs();
            break;
        }
        case MatrixSchedule::Form::PiecewiseConstant: {
            j["form"] = "piecewise_constant";
            j["breaks"] = schedule.grid_times();
            json values = json::array();
            for (const auto& v : schedule.grid_values()) values.push_back(matrix_to_json(v));
            j["values"] = std::move(values);
            break;
        }
        case MatrixSchedule::Form::Tabulated: {
            j["form"] = "tabulated";
            j["times"] = schedule.grid_times();
            json values = json::array();
            for (const auto& v : schedule.grid_values()) values.push_back(matrix_to_json(v));
            j["values"] = std::move(values);
            break;
        }
    }
    return j;
}

MatrixSchedule schedule_from_json(const json& j) {
    const std::string form = j.at("form").get<std::string>();
    if (form == "constant") return MatrixSchedule::constant(matrix_from_json(j.at("value")));
    if (form == "polynomial")
        return MatrixSchedule::polynomial(
            j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>(),
            j.at("coeffs").get<std::vector<std::vector<std::vector<double>>>>());
    if (form == "piecewise_constant" || form == "tabulated") {
        std::vector<Eigen::MatrixXd> values;
        for (const json& v : j.at("values")) values.push_back(matrix_from_json(v));
        if (form == "piecewise_constant")
            return MatrixSchedule::piecewise_constant(
                j.at("breaks").get<std::vector<double>>(), std::move(values));
        return MatrixSchedule::tabulated(j.at("times").get<std::vector<double>>(),
                                         std::move(values));
    }
    throw ValidationError("unknown schedule form: " + form);
}

SolverOptions SolverConfig::to_options() const {
    SolverOptions options;
    options.tolerance = tolerance;
    options.max_iterations = max_iterations;
    options.enable_homotopy = homotopy;
    return options;
}

mc::SimulationOptions SimulationConfig::to_options() const {
    mc::SimulationOptions options;
    options.n_paths = paths;
    options.dt = dt;
    options.seed = seed;
    options.keep_paths = keep_paths;
    options.batches = batches;
    return options;
}

Scenario Scenario::from_json(const json& j) {
    try {
        return from_json_checked(j);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("scenario schema error: ") + e.what());
    }
}

Scenario Scenario::from_json_checked(const json& j) {
    const json& sys = j.at("system");
    LtvSystem system(schedule_from_json(sys.at("A")), schedule_from_json(sys.at("B")),
                     schedule_from_json(sys.at("C")), noise_from_json(j.at("noise")),
                     schedule_from_json(sys.at("R")));
    const json& prob = j.at("problem");
    SteeringProblem problem{vector_from_json(prob.at("mu0")),
                            matrix_from_json(prob.at("Sigma0")),
                            vector_from_json(prob.at("mu1")),
                            matrix_from_json(prob.at("Sigma1"))};
    Scenario scenario{j.value("name", std::string{}), std::move(system), std::move(problem),
                      {}, {}, {}};
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        scenario.solver.tolerance = s.value("tolerance", scenario.solver.tolerance);
        scenario.solver.max_iterations =
            s.value("max_iterations", scenario.solver.max_iterations);
        scenario.solver.homotopy = s.value("homotopy", scenario.solver.homotopy);
        scenario.solver.gain_grid = s.value("gain_grid", scenario.solver.gain_grid);
    }
    if (j.contains("simulation")) {
        const json& s = j.at("simulation");
        scenario.simulation.paths = s.value("paths", scenario.simulation.paths);
        scenario.simulation.dt = s.value("dt", scenario.simulation.dt);
        scenario.simulation.seed = s.value("seed", scenario.simulation.seed);
        scenario.simulation.keep_paths = s.value("keep_paths", scenario.simulation.keep_paths);
        scenario.simulation.batches = s.value("batches", scenario.simulation.batches);
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        scenario.output.directory = o.value("directory", scenario.output.directory);
        scenario.output.emit_pi = o.value("emit_pi", scenario.output.emit_pi);
        scenario.output.emit_gains = o.value("emit_gains", scenario.output.emit_gains);
        scenario.output.emit_paths = o.value("emit_paths", scenario.output.emit_paths);
    }
    return scenario;
}

Scenario Scenario::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("scenario parse error in " + path + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        throw ValidationError("scenario schema error in " + path + ": " + e.what());
    }
}

json Scenario::to_json() const {
    json j;
    if (!name.empty()) j["name"] = name;
    j["system"] = {{"A", schedule_to_json(system.a())},
                   {"B", schedule_to_json(system.b())},
                   {"C", schedule_to_json(system.c())},
                   {"R", schedule_to_json(system.r())}};
    j["noise"] = noise_to_json(system.noise());
    j["problem"] = {{"mu0", vector_to_json(problem.mu0)},
                    {"Sigma0", matrix_to_json(problem.sigma0)},
                    {"mu1", vector_to_json(problem.mu1)},
                    {"Sigma1", matrix_to_json(problem.sigma1)}};
    j["solver"] = {{"tolerance", solver.tolerance},
                   {"max_iterations", solver.max_iterations},
                   {"homotopy", solver.homotopy},
                   {"gain_grid", solver.gain_grid}};
    j["simulation"] = {{"paths", simulation.paths},
                       {"dt", simulation.dt},
                       {"seed", simulation.seed},
                       {"keep_paths", simulation.keep_paths},
                       {"batches", simulation.batches}};
    j["output"] = {{"directory", output.directory},
                   {"emit_pi", output.emit_pi},
                   {"emit_gains", output.emit_gains},
                   {"emit_paths", output.emit_paths}};
    return j;
}

Scenario example1_scenario() {
    // Scalar population under epidemic shocks: a(t) = 0.8 - 0.1 t, unit
    // control and noise channels, jumps of size -4 at rate 2 + t plus
    // Wiener noise of scale 2.
    MatrixSchedule a = MatrixSchedule::scalar_polynomial({0.8, -0.1});
    MatrixSchedule b = MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1));
    MatrixSchedule c = MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1));
    MatrixSchedule r = MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1));
    NoiseSpec noise(1, {WienerComponent{2.0 * Eigen::MatrixXd::Identity(1, 1)},
                        CompoundPoissonComponent{MatrixSchedule::scalar_polynomial({2.0, 1.0}),
                                                 {JumpLaw::constant(-4.0)}}});
    LtvSystem system(std::move(a), std::move(b), std::move(c), std::move(noise), std::move(r));
    SteeringProblem problem{Eigen::VectorXd::Constant(1, 50.0),
                            Eigen::MatrixXd::Constant(1, 1, 6.0),
                            Eigen::VectorXd::Constant(1, 60.0),
                            Eigen::MatrixXd::Constant(1, 1, 2.0)};
    Scenario scenario{"example1", std::move(system), std::move(problem), {}, {}, {}};
    return scenario;
}

Scenario example2_scenario() {
    // Vertical hover in heavy rain: double integrator, raindrop impulses
    // N(-0.5, 0.1^2) at rate 5 - t on the velocity channel plus Wiener
    // noise of scale 0.2.
    Eigen::MatrixXd a_mat(2, 2);
    a_mat << 0.0, 1.0, 0.0, 0.0;
    Eigen::MatrixXd b_mat(2, 1);
    b_mat << 0.0, 1.0;
    MatrixSchedule a = MatrixSchedule::constant(a_mat);
    MatrixSchedule b = MatrixSchedule::constant(b_mat);
    MatrixSchedule c = MatrixSchedule::constant(b_mat);
    MatrixSchedule r = MatrixSchedule::constant(Eigen::MatrixXd::Identity(1, 1));
    NoiseSpec noise(1, {WienerComponent{0.2 * Eigen::MatrixXd::Identity(1, 1)},
                        CompoundPoissonComponent{MatrixSchedule::scalar_polynomial({5.0, -1.0}),
                                                 {JumpLaw::normal(-0.5, 0.1)}}});
    LtvSystem system(std::move(a), std::move(b), std::move(c), std::move(noise), std::move(r));
    Eigen::MatrixXd sigma0 = Eigen::Vector2d(0.6, 0.6).asDiagonal();
    Eigen::MatrixXd sigma1 = Eigen::Vector2d(0.2, 0.1).asDiagonal();
    SteeringProblem problem{Eigen::VectorXd::Zero(2), sigma0, Eigen::VectorXd::Zero(2), sigma1};
    Scenario scenario{"example2", std::move(system), std::move(problem), {}, {}, {}};
    return scenario;
}

std::optional<Scenario> builtin_scenario(const std::string& name) {
    if (name == "example1") return example1_scenario();
    if (name == "example2") return example2_scenario();
    return std::nullopt;
}

}  // namespace covsteer
