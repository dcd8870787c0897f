#pragma once

#include "fblab/grid.hpp"
#include "fblab/problem.hpp"
#include "fblab/validation.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fblab {

struct GridSettings {
    int n_time_steps = 100;
    // All three set, or all three absent (the mesh is then sized from the probed growth bound).
    std::optional<double> x_min;
    std::optional<double> x_max;
    std::optional<int> n_cells;
};

struct MonteCarloSettings {
    long n_paths = 10000;
    std::uint64_t master_seed = 12345;
};

struct LdpSettings {
    std::vector<std::vector<double>> terminals;     ///< endpoints for `action`
    std::optional<std::vector<double>> tube_terminal;  ///< endpoint of the rare-event reference path
    std::vector<double> psi_terminals;              ///< Y-endpoints for J; default u(T, terminal)
    double delta = 0.25;
    double shooting_tol = 1e-12;
    double action_tol = 1e-4;
};

/// A parsed and schema-checked scenario file.
struct Scenario {
    std::string name;
    std::string description;
    ProblemSpec problem;
    GridSettings grids;
    MonteCarloSettings montecarlo;
    LdpSettings ldp;
    ProbeConfig validation;

    TimeGrid time_grid() const { return {problem.t0(), problem.T(), grids.n_time_steps}; }
    /// Requires a resolved mesh (see resolve_mesh).
    SpatialGrid spatial_grid() const;
};

/// Parses a scenario document; unknown keys and type mismatches are input errors.
/// A run manifest is accepted too: its "resolved_scenario" member is used.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& sc);

/// Built-in catalog: heat_affine, burgers_linear, schilder, damped_coupling.
const std::vector<std::string>& builtin_scenario_names();
std::string builtin_scenario_text(const std::string& name);

/// `source` is a file path or the name of a built-in scenario. Throws Io errors
/// for unreadable files and input errors for invalid content.
Scenario load_scenario(const std::string& source);

/// Command-line overrides applied on top of the file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
    std::optional<std::vector<double>> epsilons;
    std::optional<double> dt;
};

void apply_overrides(Scenario& sc, const Overrides& ov);

/// Fills in an absent mesh from the probed growth bound with cell width 0.05
/// and checks the start point lies in the working region.
void resolve_mesh(Scenario& sc);

}  // namespace fblab
