#include "fblab/scenario.hpp"

#include "fblab/errors.hpp"
#include "fblab/pde.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fblab {

using nlohmann::json;

namespace {

// The bundled catalog. scenarios/*.json in the source tree carry the same text.
const std::map<std::string, std::string>& catalog() {
    static const std::map<std::string, std::string> entries = {
        {"heat_affine", R"({
  "name": "heat_affine",
  "description": "Driftless heat flow of affine terminal data; u(t, x) = x for every eps.",
  "problem": {"d": 1, "k": 1, "t0": 0.0, "T": 0.5, "x0": [1.0], "epsilons": [0.2, 0.1, 0.05]},
  "coefficients": {"f": ["0"], "g": ["0"], "sigma": [["1"]], "h": ["x1"]},
  "grids": {"n_time_steps": 200, "x_min": -6.0, "x_max": 8.0, "n_cells": 280},
  "montecarlo": {"n_paths": 10000, "master_seed": 12345},
  "ldp": {"terminals": [[1.5]], "delta": 0.25, "shooting_tol": 1e-12, "action_tol": 1e-4},
  "validation": {"probe_budget": 10000, "box_radius": 5.0}
}
)"},
        {"burgers_linear", R"({
  "name": "burgers_linear",
  "description": "Backward Burgers coupling f = y with linear terminal data h = x/2; u0 = 2/3.",
  "problem": {"d": 1, "k": 1, "t0": 0.0, "T": 0.5, "x0": [1.0], "epsilons": [0.2, 0.1, 0.05, 0.025]},
  "coefficients": {"f": ["y1"], "g": ["0"], "sigma": [["1"]], "h": ["0.5*x1"]},
  "grids": {"n_time_steps": 200, "x_min": -6.0, "x_max": 8.0, "n_cells": 280},
  "montecarlo": {"n_paths": 10000, "master_seed": 12345},
  "ldp": {"terminals": [[1.6], [2.0], [1.0]], "delta": 0.25, "shooting_tol": 1e-12, "action_tol": 1e-4},
  "validation": {"probe_budget": 10000, "box_radius": 5.0}
}
)"},
        {"schilder", R"({
  "name": "schilder",
  "description": "Scaled Brownian motion; minimum action to reach offset D in time 1 is D^2/2.",
  "problem": {"d": 1, "k": 1, "t0": 0.0, "T": 1.0, "x0": [0.0], "epsilons": [0.2, 0.1, 0.05]},
  "coefficients": {"f": ["0"], "g": ["0"], "sigma": [["1"]], "h": ["0"]},
  "grids": {"n_time_steps": 100, "x_min": -4.0, "x_max": 5.0, "n_cells": 180},
  "montecarlo": {"n_paths": 1000000, "master_seed": 12345},
  "ldp": {"terminals": [[0.5], [1.0], [2.0]], "tube_terminal": [1.0], "delta": 0.25,
          "shooting_tol": 1e-12, "action_tol": 1e-4},
  "validation": {"probe_budget": 10000, "box_radius": 5.0}
}
)"},
        {"damped_coupling", R"({
  "name": "damped_coupling",
  "description": "Linear driver g = -y with h = 1; u(t, x) = exp(t - T).",
  "problem": {"d": 1, "k": 1, "t0": 0.0, "T": 0.5, "x0": [0.0], "epsilons": [0.2, 0.1, 0.05]},
  "coefficients": {"f": ["0"], "g": ["-y1"], "sigma": [["1"]], "h": ["1"]},
  "grids": {"n_time_steps": 100, "x_min": -5.0, "x_max": 5.0, "n_cells": 200},
  "montecarlo": {"n_paths": 10000, "master_seed": 12345},
  "ldp": {"terminals": [[0.5]], "delta": 0.25, "shooting_tol": 1e-12, "action_tol": 1e-4},
  "validation": {"probe_budget": 10000, "box_radius": 5.0}
}
)"},
    };
    return entries;
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw input_error(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items())
        if (!ok.count(item.key())) throw input_error("unknown key '" + item.key() + "' in " + where);
}

const json& require(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw input_error(where + " is missing '" + key + "'");
    return obj.at(key);
}

template <typename T>
T as(const json& v, const std::string& what) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw input_error(what + " has the wrong type");
    }
}

double as_number(const json& v, const std::string& what) {
    if (!v.is_number()) throw input_error(what + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw input_error(what + " must be finite");
    return x;
}

std::vector<double> as_numbers(const json& v, const std::string& what) {
    if (!v.is_array()) throw input_error(what + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], what + "[" + std::to_string(i) + "]"));
    return out;
}

long as_integer(const json& v, const std::string& what) {
    if (!v.is_number_integer()) throw input_error(what + " must be an integer");
    return v.get<long>();
}

// "y1" or ["y1", ...]
std::vector<std::string> as_expressions(const json& v, const std::string& what) {
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw input_error(what + " must be a string or an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw input_error(what + " entries must be strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

// "1" (d = 1) or [["1", ...], ...]
std::vector<std::vector<std::string>> as_matrix(const json& v, const std::string& what) {
    if (v.is_string()) return {{v.get<std::string>()}};
    if (!v.is_array()) throw input_error(what + " must be a string or an array of rows");
    std::vector<std::vector<std::string>> out;
    for (const auto& row : v) out.push_back(as_expressions(row, what + " row"));
    return out;
}

}  // namespace

SpatialGrid Scenario::spatial_grid() const {
    if (!grids.x_min || !grids.x_max || !grids.n_cells) throw input_error("spatial mesh is not resolved");
    return {*grids.x_min, *grids.x_max, *grids.n_cells};
}

Scenario scenario_from_json(const json& input) {
    const json& doc = input.is_object() && input.contains("resolved_scenario") ? input.at("resolved_scenario") : input;
    reject_unknown(doc, "scenario",
                   {"name", "description", "problem", "coefficients", "grids", "montecarlo", "ldp", "validation"});

    const json& p = require(doc, "scenario", "problem");
    reject_unknown(p, "problem", {"d", "k", "t0", "T", "x0", "epsilons"});
    const json& c = require(doc, "scenario", "coefficients");
    reject_unknown(c, "coefficients", {"f", "g", "sigma", "h"});

    const long d = as_integer(require(p, "problem", "d"), "problem.d");
    const long k = as_integer(require(p, "problem", "k"), "problem.k");
    if (d < 1 || k < 1 || d > kMaxDimension || k > kMaxDimension)
        throw input_error("problem dimensions must lie in [1, " + std::to_string(kMaxDimension) + "]");
    const std::vector<double> x0v = as_numbers(require(p, "problem", "x0"), "problem.x0");
    const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));

    CoefficientText text{as_expressions(require(c, "coefficients", "f"), "coefficients.f"),
                         as_expressions(require(c, "coefficients", "g"), "coefficients.g"),
                         as_matrix(require(c, "coefficients", "sigma"), "coefficients.sigma"),
                         as_expressions(require(c, "coefficients", "h"), "coefficients.h")};

    Scenario sc{doc.contains("name") ? as<std::string>(doc.at("name"), "name") : std::string("custom"),
                doc.contains("description") ? as<std::string>(doc.at("description"), "description") : std::string(),
                ProblemSpec(static_cast<int>(d), static_cast<int>(k), as_number(require(p, "problem", "t0"), "problem.t0"),
                            as_number(require(p, "problem", "T"), "problem.T"), x0,
                            p.contains("epsilons") ? as_numbers(p.at("epsilons"), "problem.epsilons")
                                                   : std::vector<double>{},
                            std::move(text)),
                {}, {}, {}, {}};

    if (doc.contains("grids")) {
        const json& g = doc.at("grids");
        reject_unknown(g, "grids", {"n_time_steps", "x_min", "x_max", "n_cells"});
        if (g.contains("n_time_steps")) {
            const long n = as_integer(g.at("n_time_steps"), "grids.n_time_steps");
            if (n < 1 || n > 10'000'000) throw input_error("grids.n_time_steps must lie in [1, 1e7]");
            sc.grids.n_time_steps = static_cast<int>(n);
        }
        const int present = g.contains("x_min") + g.contains("x_max") + g.contains("n_cells");
        if (present != 0 && present != 3) throw input_error("grids needs all of x_min, x_max, n_cells or none");
        if (present == 3) {
            sc.grids.x_min = as_number(g.at("x_min"), "grids.x_min");
            sc.grids.x_max = as_number(g.at("x_max"), "grids.x_max");
            const long cells = as_integer(g.at("n_cells"), "grids.n_cells");
            if (cells < 2 || cells > 10'000'000) throw input_error("grids.n_cells must lie in [2, 1e7]");
            sc.grids.n_cells = static_cast<int>(cells);
            (void)sc.spatial_grid();
        }
    }
    if (doc.contains("montecarlo")) {
        const json& m = doc.at("montecarlo");
        reject_unknown(m, "montecarlo", {"n_paths", "master_seed"});
        if (m.contains("n_paths")) {
            sc.montecarlo.n_paths = as_integer(m.at("n_paths"), "montecarlo.n_paths");
            if (sc.montecarlo.n_paths < 1) throw input_error("montecarlo.n_paths must be positive");
        }
        if (m.contains("master_seed")) {
            if (!m.at("master_seed").is_number_unsigned() && !(m.at("master_seed").is_number_integer()
                                                               && m.at("master_seed").get<long>() >= 0))
                throw input_error("montecarlo.master_seed must be a non-negative integer");
            sc.montecarlo.master_seed = m.at("master_seed").get<std::uint64_t>();
        }
    }
    if (doc.contains("ldp")) {
        const json& l = doc.at("ldp");
        reject_unknown(l, "ldp", {"terminals", "tube_terminal", "psi_terminals", "delta", "shooting_tol", "action_tol"});
        if (l.contains("terminals")) {
            if (!l.at("terminals").is_array()) throw input_error("ldp.terminals must be an array of points");
            for (const auto& t : l.at("terminals")) {
                auto v = as_numbers(t, "ldp.terminals entry");
                if (static_cast<long>(v.size()) != d) throw input_error("ldp.terminals entries need d coordinates");
                sc.ldp.terminals.push_back(std::move(v));
            }
        }
        if (l.contains("tube_terminal")) {
            auto v = as_numbers(l.at("tube_terminal"), "ldp.tube_terminal");
            if (static_cast<long>(v.size()) != d) throw input_error("ldp.tube_terminal needs d coordinates");
            sc.ldp.tube_terminal = std::move(v);
        }
        if (l.contains("psi_terminals")) sc.ldp.psi_terminals = as_numbers(l.at("psi_terminals"), "ldp.psi_terminals");
        if (l.contains("delta")) sc.ldp.delta = as_number(l.at("delta"), "ldp.delta");
        if (l.contains("shooting_tol")) sc.ldp.shooting_tol = as_number(l.at("shooting_tol"), "ldp.shooting_tol");
        if (l.contains("action_tol")) sc.ldp.action_tol = as_number(l.at("action_tol"), "ldp.action_tol");
        if (!(sc.ldp.delta > 0.0)) throw input_error("ldp.delta must be positive");
        if (!(sc.ldp.shooting_tol > 0.0) || !(sc.ldp.action_tol > 0.0))
            throw input_error("ldp tolerances must be positive");
    }
    if (doc.contains("validation")) {
        const json& v = doc.at("validation");
        reject_unknown(v, "validation", {"probe_budget", "box_radius", "lipschitz_cap", "probe_seed"});
        if (v.contains("probe_budget")) {
            const long b = as_integer(v.at("probe_budget"), "validation.probe_budget");
            if (b < 100 || b > 100'000'000) throw input_error("validation.probe_budget must lie in [100, 1e8]");
            sc.validation.probe_budget = static_cast<int>(b);
        }
        if (v.contains("box_radius")) sc.validation.box_radius = as_number(v.at("box_radius"), "validation.box_radius");
        if (v.contains("lipschitz_cap"))
            sc.validation.lipschitz_cap = as_number(v.at("lipschitz_cap"), "validation.lipschitz_cap");
        if (v.contains("probe_seed")) {
            if (as_integer(v.at("probe_seed"), "validation.probe_seed") < 0)
                throw input_error("validation.probe_seed must be non-negative");
            sc.validation.probe_seed = v.at("probe_seed").get<std::uint64_t>();
        }
        if (!(sc.validation.box_radius > 0.0) || !(sc.validation.lipschitz_cap > 0.0))
            throw input_error("validation.box_radius and lipschitz_cap must be positive");
    }
    return sc;
}

json scenario_to_json(const Scenario& sc) {
    const ProblemSpec& p = sc.problem;
    json doc;
    doc["name"] = sc.name;
    if (!sc.description.empty()) doc["description"] = sc.description;
    doc["problem"] = {{"d", p.d()},
                      {"k", p.k()},
                      {"t0", p.t0()},
                      {"T", p.T()},
                      {"x0", std::vector<double>(p.x0().data(), p.x0().data() + p.x0().size())},
                      {"epsilons", p.epsilons()}};
    doc["coefficients"] = {{"f", p.text().f}, {"g", p.text().g}, {"sigma", p.text().sigma}, {"h", p.text().h}};
    json grids = {{"n_time_steps", sc.grids.n_time_steps}};
    if (sc.grids.x_min) {
        grids["x_min"] = *sc.grids.x_min;
        grids["x_max"] = *sc.grids.x_max;
        grids["n_cells"] = *sc.grids.n_cells;
    }
    doc["grids"] = grids;
    doc["montecarlo"] = {{"n_paths", sc.montecarlo.n_paths}, {"master_seed", sc.montecarlo.master_seed}};
    json ldp = {{"terminals", sc.ldp.terminals},
                {"delta", sc.ldp.delta},
                {"shooting_tol", sc.ldp.shooting_tol},
                {"action_tol", sc.ldp.action_tol}};
    if (sc.ldp.tube_terminal) ldp["tube_terminal"] = *sc.ldp.tube_terminal;
    if (!sc.ldp.psi_terminals.empty()) ldp["psi_terminals"] = sc.ldp.psi_terminals;
    doc["ldp"] = ldp;
    doc["validation"] = {{"probe_budget", sc.validation.probe_budget},
                         {"box_radius", sc.validation.box_radius},
                         {"lipschitz_cap", sc.validation.lipschitz_cap},
                         {"probe_seed", sc.validation.probe_seed}};
    return doc;
}

const std::vector<std::string>& builtin_scenario_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, text] : catalog()) out.push_back(name);
        return out;
    }();
    return names;
}

std::string builtin_scenario_text(const std::string& name) {
    const auto it = catalog().find(name);
    if (it == catalog().end()) throw input_error("no built-in scenario named '" + name + "'");
    return it->second;
}

Scenario load_scenario(const std::string& source) {
    std::string text;
    if (catalog().count(source)) {
        text = catalog().at(source);
    } else {
        std::ifstream in(source, std::ios::binary);
        if (!in) {
            std::string known;
            for (const auto& n : builtin_scenario_names()) known += (known.empty() ? "" : ", ") + n;
            throw Error(ErrorKind::Io, "cannot read scenario '" + source + "' (built-in scenarios: " + known + ")");
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw input_error("scenario '" + source + "' is not valid JSON: " + e.what());
    }
    return scenario_from_json(doc);
}

void apply_overrides(Scenario& sc, const Overrides& ov) {
    if (ov.seed) sc.montecarlo.master_seed = *ov.seed;
    if (ov.paths) {
        if (*ov.paths < 1) throw input_error("--paths must be positive");
        sc.montecarlo.n_paths = *ov.paths;
    }
    if (ov.epsilons) sc.problem = sc.problem.with_epsilons(*ov.epsilons);
    if (ov.dt) {
        if (!(*ov.dt > 0.0) || !std::isfinite(*ov.dt)) throw input_error("--dt must be positive");
        const double steps = sc.problem.horizon() / *ov.dt;
        const double rounded = std::round(steps);
        if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps) || rounded < 1.0 || rounded > 1e7)
            throw input_error("--dt must divide the horizon T - t0 into a whole number of steps");
        sc.grids.n_time_steps = static_cast<int>(rounded);
    }
}

void resolve_mesh(Scenario& sc) {
    if (sc.problem.d() != 1 || sc.problem.k() != 1) return;
    if (!sc.grids.x_min) {
        const ValidationReport rep = validate(sc.problem, sc.validation);
        double max_eps = 0.0;
        for (double e : sc.problem.epsilons()) max_eps = std::max(max_eps, e);
        const SpatialGrid g = suggest_spatial_grid(sc.problem, max_eps, rep.Lambda_hat, 0.05);
        sc.grids.x_min = g.x_min();
        sc.grids.x_max = g.x_max();
        sc.grids.n_cells = g.n_cells();
    }
    sc.spatial_grid().require_margin(sc.problem.x0()[0]);
}

}  // namespace fblab
