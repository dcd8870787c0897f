#include "fblab/cli.hpp"

#include "fblab/errors.hpp"
#include "fblab/fbsde.hpp"
#include "fblab/ldp.hpp"
#include "fblab/limit.hpp"
#include "fblab/montecarlo.hpp"
#include "fblab/parallel.hpp"
#include "fblab/pde.hpp"
#include "fblab/report.hpp"
#include "fblab/scenario.hpp"
#include "fblab/validation.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace fblab {

namespace {

std::vector<double> parse_real_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string item = text.substr(pos, comma - pos);
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
        double v = 0.0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
            throw input_error("--eps expects a comma-separated list of numbers, got '" + text + "'");
        out.push_back(v);
        pos = comma + 1;
    }
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_real(v[i]);
    return s;
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

// State shared by the stages of one invocation. Expensive intermediate
// results are computed once and reused by later stages.
class Run {
public:
    Run(Scenario sc, fs::path out, bool quiet, std::ostream& log)
        : sc_(std::move(sc)), out_(std::move(out)), quiet_(quiet), log_(log) {}

    const Scenario& scenario() const { return sc_; }
    std::vector<Check>& checks() { return checks_; }
    std::vector<std::string>& notes() { return notes_; }

    template <typename F>
    auto timed(const std::string& stage, F&& fn) {
        if (!quiet_) log_ << "[fblab] " << stage << " ...\n" << std::flush;
        const auto start = std::chrono::steady_clock::now();
        auto finish = [&] {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            timings_[stage] = timings_.value(stage, 0.0) + secs;
        };
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto result = fn();
            finish();
            return result;
        }
    }

    void emit(const CsvTable& table, const std::string& name) {
        table.write(out_ / name);
        outputs_.push_back(name);
    }

    void check(std::string name, bool passed, std::string detail) {
        checks_.push_back({std::move(name), passed, std::move(detail)});
    }

    void count_ensemble(const TrajectoryEnsemble& ens) {
        clamps_ += ens.clamps;
        exits_ += ens.exits;
    }

    const std::vector<DecouplingField>& viscous_fields() {
        if (!viscous_) {
            const TimeGrid tg = sc_.time_grid();
            const SpatialGrid xg = sc_.spatial_grid();
            std::vector<DecouplingField> fields;
            timed("pde", [&] {
                for (double eps : sc_.problem.epsilons()) fields.push_back(solve_viscous(sc_.problem, eps, tg, xg));
            });
            viscous_ = std::move(fields);
        }
        return *viscous_;
    }

    const LimitSolution& limit() {
        if (!limit_) {
            ShootOptions opt;
            opt.tol = sc_.ldp.shooting_tol;
            limit_ = timed("limit.shoot", [&] { return shoot(sc_.problem, sc_.time_grid(), opt); });
        }
        return *limit_;
    }

    const DecouplingField& inviscid() {
        if (!inviscid_) {
            ShootOptions opt;
            opt.tol = sc_.ldp.shooting_tol;
            inviscid_ = timed("limit.inviscid_field",
                              [&] { return inviscid_field(sc_.problem, sc_.time_grid(), sc_.spatial_grid(), opt); });
        }
        return *inviscid_;
    }

    const SweepReport& sweep() {
        if (!sweep_) {
            const auto& fields = viscous_fields();
            const auto& lim = limit();
            const RandomSource src(sc_.montecarlo.master_seed);
            sweep_ = timed("ensembles", [&] {
                return convergence_sweep(sc_.problem, fields, lim, static_cast<int>(sc_.montecarlo.n_paths), src);
            });
        }
        return *sweep_;
    }

    json manifest(const std::string& subcommand, int exit_code, const std::string& message) const {
        json m;
        m["tool"] = "fblab";
        m["tool_version"] = kVersion;
        m["subcommand"] = subcommand;
        m["seed"] = sc_.montecarlo.master_seed;
        m["resolved_scenario"] = scenario_to_json(sc_);
        m["timings_seconds"] = timings_;
        m["outputs"] = outputs_;
        m["warnings"] = {{"boundary_clamps", clamps_}, {"path_exits", exits_}};
        m["exit_code"] = exit_code;
        if (!message.empty()) m["message"] = message;
        return m;
    }

    void finish(const std::string& subcommand, int exit_code, const std::string& message) {
        std::ostringstream s;
        s << "fblab " << subcommand << " on scenario " << sc_.name << "\n";
        if (checks_.empty()) s << "no checks\n";
        for (const Check& c : checks_) s << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  (" << c.detail << ")\n";
        for (const std::string& n : notes_) s << "note: " << n << "\n";
        if (!message.empty()) s << "error: " << message << "\n";
        s << "exit code " << exit_code << "\n";
        try {
            write_text(out_ / "summary.txt", s.str());
            outputs_.push_back("summary.txt");
        } catch (const Error&) {
            // The manifest below reports the same failure.
        }
        write_json(out_ / "manifest.json", manifest(subcommand, exit_code, message));
    }

private:
    Scenario sc_;
    fs::path out_;
    bool quiet_;
    std::ostream& log_;
    json timings_ = json::object();
    std::vector<std::string> outputs_;
    std::vector<Check> checks_;
    std::vector<std::string> notes_;
    long clamps_ = 0;
    long exits_ = 0;
    std::optional<std::vector<DecouplingField>> viscous_;
    std::optional<LimitSolution> limit_;
    std::optional<DecouplingField> inviscid_;
    std::optional<SweepReport> sweep_;
};

// ---------------------------------------------------------------- stages

bool stage_validate(Run& run) {
    const Scenario& sc = run.scenario();
    const ValidationReport rep = run.timed("validate", [&] { return validate(sc.problem, sc.validation); });

    CsvTable t({"quantity", "value"});
    t.row() << "L_hat" << rep.L_hat;
    t.row() << "Lambda_hat" << rep.Lambda_hat;
    t.row() << "lambda_hat" << rep.lambda_hat.value_or(std::numeric_limits<double>::quiet_NaN());
    t.row() << "bounded_sigma" << (rep.bounded_sigma ? 1.0 : 0.0);
    t.row() << "bounded_h" << (rep.bounded_h ? 1.0 : 0.0);
    t.row() << "probe_points" << static_cast<double>(rep.probe_points);
    for (const auto& [name, v] : rep.lipschitz_by_coefficient) t.row() << "lipschitz_" + name << v;
    for (const auto& [name, v] : rep.growth_by_coefficient) t.row() << "growth_" + name << v;
    run.emit(t, "validation.csv");

    CsvTable v({"assumption", "coefficient", "value", "witness"});
    for (const Violation& viol : rep.violations) {
        std::string w;
        for (const auto& [label, x] : viol.witness) w += (w.empty() ? "" : ";") + label + "=" + format_real(x);
        v.row() << viol.assumption << viol.coefficient << viol.value << w;
    }
    run.emit(v, "violations.csv");

    run.check("assumption probes found no violation", rep.violations.empty(),
              std::to_string(rep.violations.size()) + " violations over " + std::to_string(rep.probe_points) +
                  " probe points");
    return rep.violations.empty();
}

void stage_pde(Run& run) {
    const Scenario& sc = run.scenario();
    const auto& fields = run.viscous_fields();
    CsvTable summary({"eps", "u_at_x0", "du_dx_at_x0", "sup_abs_u", "sup_abs_du_dx", "terminal_error"});
    double first_sup = 0.0, max_sup = 0.0;
    bool terminal_exact = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const DecouplingField& f = fields[i];
        CsvTable t({"s", "x", "u", "du_dx"});
        for (int m = 0; m < f.tgrid.n_nodes(); ++m)
            for (int j = 0; j < f.xgrid.n_nodes(); ++j)
                t.row() << f.tgrid.node(m) << f.xgrid.node(j) << f.u(m, j) << f.du_dx(m, j);
        run.emit(t, "field_eps_" + std::to_string(i) + ".csv");

        double terminal_error = 0.0;
        const int n = f.tgrid.n_steps();
        for (int j = 0; j < f.xgrid.n_nodes(); ++j)
            terminal_error = std::max(terminal_error, std::abs(f.u(n, j) - sc.problem.terminal1(f.xgrid.node(j))));
        terminal_exact = terminal_exact && terminal_error == 0.0;
        const ScalarSample at = field_at_node(f, 0, sc.problem.x0()[0]);
        const double sup_u = f.u.cwiseAbs().maxCoeff();
        if (i == 0) first_sup = sup_u;
        max_sup = std::max(max_sup, sup_u);
        summary.row() << f.epsilon << at.value << at.gradient << sup_u << f.du_dx.cwiseAbs().maxCoeff()
                      << terminal_error;
    }
    run.emit(summary, "pde_summary.csv");
    if (fields.empty()) {
        run.notes().push_back("pde: no rows (empty epsilon list)");
        return;
    }
    run.check("terminal slice equals h on every node", terminal_exact, "max |u(T, x) - h(x)| over all eps");
    run.check("sup|u| stays within 50% of its value at the largest eps", max_sup <= 1.5 * first_sup,
              "max " + format_real(max_sup) + " vs " + format_real(first_sup));
}

void stage_limit(Run& run) {
    const Scenario& sc = run.scenario();
    const LimitSolution& lim = run.limit();
    const int d = sc.problem.d(), k = sc.problem.k();

    std::vector<std::string> header{"s"};
    for (int i = 0; i < d; ++i) header.push_back("X" + std::to_string(i + 1));
    for (int i = 0; i < k; ++i) header.push_back("Y" + std::to_string(i + 1));
    CsvTable path(header);
    for (int m = 0; m < lim.grid.n_nodes(); ++m) {
        auto r = path.row();
        r << lim.grid.node(m);
        for (int i = 0; i < d; ++i) r << lim.X.values(m, i);
        for (int i = 0; i < k; ++i) r << lim.Y.values(m, i);
    }
    run.emit(path, "limit_path.csv");

    std::vector<std::string> sh;
    for (int i = 0; i < k; ++i) sh.push_back("u0_" + std::to_string(i + 1));
    for (const char* c : {"residual", "newton_iterations", "used_homotopy"}) sh.emplace_back(c);
    CsvTable summary(sh);
    {
        auto r = summary.row();
        for (int i = 0; i < k; ++i) r << lim.u0[i];
        r << lim.residual << lim.newton_iterations << lim.used_homotopy;
    }
    run.emit(summary, "limit_summary.csv");
    run.check("shooting residual within tolerance", lim.residual <= sc.ldp.shooting_tol,
              "residual " + format_real(lim.residual));

    // Root probe: 50 candidates per component on [-5, 5] around zero (k = 1) or along the diagonal.
    std::vector<Eigen::VectorXd> candidates;
    for (int i = 0; i < 50; ++i) candidates.push_back(Eigen::VectorXd::Constant(k, -5.0 + 10.0 * i / 49.0));
    const UniquenessProbe probe = run.timed(
        "limit.uniqueness", [&] { return verify_uniqueness_probe(sc.problem, sc.time_grid(), candidates); });
    std::vector<std::string> rh;
    for (int i = 0; i < k; ++i) rh.push_back("root_" + std::to_string(i + 1));
    for (const char* c : {"residual", "hits", "inverse_jacobian_norm"}) rh.emplace_back(c);
    CsvTable roots(rh);
    for (const RootCluster& cl : probe.roots) {
        auto r = roots.row();
        for (int i = 0; i < k; ++i) r << cl.root[i];
        r << cl.residual << cl.hits << cl.inverse_jacobian_norm;
    }
    run.emit(roots, "limit_roots.csv");
    run.check("root probe finds a single cluster", probe.roots.size() == 1,
              std::to_string(probe.roots.size()) + " clusters, " + std::to_string(probe.failed_candidates) +
                  " failed candidates");

    if (d != 1 || k != 1) {
        run.notes().push_back("limit: inviscid field skipped (needs d = k = 1)");
        return;
    }
    const DecouplingField& inv = run.inviscid();
    CsvTable field({"s", "x", "u", "du_dx"});
    for (int m = 0; m < inv.tgrid.n_nodes(); ++m)
        for (int j = 0; j < inv.xgrid.n_nodes(); ++j)
            field.row() << inv.tgrid.node(m) << inv.xgrid.node(j) << inv.u(m, j) << inv.du_dx(m, j);
    run.emit(field, "inviscid_field.csv");
}

void stage_simulate(Run& run) {
    const Scenario& sc = run.scenario();
    const auto& fields = run.viscous_fields();
    const SweepReport& rep = run.sweep();
    CsvTable t({"eps", "n_paths", "mean_Y0", "E_sup_X_diff_sq", "E_sup_Y_diff_sq", "E_int_Z_sq", "bsde_residual"});
    for (const SweepRow& r : rep.rows)
        t.row() << r.eps << static_cast<long>(r.n_paths) << r.mean_Y0 << r.E_sup_X_diff_sq << r.E_sup_Y_diff_sq
                << r.E_int_Z_sq << r.bsde_residual;
    run.emit(t, "ensemble_summary.csv");

    // A few sample paths per eps for plotting; the ensembles themselves are not stored.
    const RandomSource src(sc.montecarlo.master_seed);
    const int shown = static_cast<int>(std::min<long>(10, sc.montecarlo.n_paths));
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const TrajectoryEnsemble ens = run.timed("ensembles", [&] {
            return simulate(sc.problem, fields[i], fields[i].epsilon, static_cast<int>(sc.montecarlo.n_paths), src);
        });
        run.count_ensemble(ens);
        CsvTable p({"path", "s", "X", "Y", "Z"});
        for (int path = 0; path < shown; ++path)
            for (int m = 0; m < ens.grid.n_nodes(); ++m)
                p.row() << static_cast<long>(path) << ens.grid.node(m) << ens.X(path, m) << ens.Y(path, m)
                        << ens.Z(path, m);
        run.emit(p, "paths_eps_" + std::to_string(i) + ".csv");
    }
    if (rep.rows.empty()) run.notes().push_back("simulate: no rows (empty epsilon list)");
}

void stage_sweep(Run& run) {
    const SweepReport& rep = run.sweep();
    CsvTable t({"eps", "log_eps", "n_paths", "E_sup_X_diff_sq", "se_X", "E_sup_Y_diff_sq", "se_Y", "E_int_Z_sq",
                "se_Z", "log_E_sup_X_diff_sq", "log_E_sup_Y_diff_sq", "log_E_int_Z_sq"});
    for (const SweepRow& r : rep.rows)
        t.row() << r.eps << std::log(r.eps) << static_cast<long>(r.n_paths) << r.E_sup_X_diff_sq << r.se_X
                << r.E_sup_Y_diff_sq << r.se_Y << r.E_int_Z_sq << r.se_Z << std::log(r.E_sup_X_diff_sq)
                << std::log(r.E_sup_Y_diff_sq) << std::log(r.E_int_Z_sq);
    run.emit(t, "sweep.csv");

    CsvTable s({"norm", "log_log_slope"});
    s.row() << "E_sup_X_diff_sq" << rep.slope_X;
    s.row() << "E_sup_Y_diff_sq" << rep.slope_Y;
    s.row() << "E_int_Z_sq" << rep.slope_Z;
    run.emit(s, "sweep_slopes.csv");

    if (rep.rows.empty()) {
        run.notes().push_back("sweep: no rows");
        return;
    }
    bool monotone = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        const SweepRow &a = rep.rows[i - 1], &b = rep.rows[i];
        monotone = monotone && b.E_sup_X_diff_sq <= a.E_sup_X_diff_sq + 2.0 * std::hypot(a.se_X, b.se_X) &&
                   b.E_sup_Y_diff_sq <= a.E_sup_Y_diff_sq + 2.0 * std::hypot(a.se_Y, b.se_Y) &&
                   b.E_int_Z_sq <= a.E_int_Z_sq + 2.0 * std::hypot(a.se_Z, b.se_Z);
    }
    run.check("norms nonincreasing as eps decreases (within 2 SE)", monotone, std::to_string(rep.rows.size()) + " rows");
    const bool slopes = in_range(rep.slope_X, 0.7, 1.3) && in_range(rep.slope_Y, 0.7, 1.3) &&
                        in_range(rep.slope_Z, 0.7, 1.3);
    run.check("log-log slopes in [0.7, 1.3]", slopes,
              "slopes " + join({rep.slope_X, rep.slope_Y, rep.slope_Z}));
}

void stage_action(Run& run) {
    const Scenario& sc = run.scenario();
    if (sc.problem.d() != 1 || sc.problem.k() != 1) throw input_error("action needs d = k = 1");
    if (sc.ldp.terminals.empty()) {
        run.notes().push_back("action: no ldp.terminals configured");
        run.emit(CsvTable({"terminal", "rate_value", "constraint_violation", "converged", "rounds", "iterations"}),
                 "action.csv");
        return;
    }
    const DecouplingField& inv = run.inviscid();
    const ControlledODE ode = ControlledODE::from_field(sc.problem, inv);
    const double T = inv.tgrid.T();

    CsvTable t({"terminal", "rate_value", "constraint_violation", "converged", "rounds", "iterations"});
    std::vector<double> rates;
    bool all_converged = true;
    for (std::size_t i = 0; i < sc.ldp.terminals.size(); ++i) {
        const double terminal = sc.ldp.terminals[i][0];
        const ActionResult res =
            run.timed("action", [&] { return minimize_action(ode, SmallVec::Constant(1, terminal), sc.ldp.action_tol); });
        t.row() << terminal << res.value << res.constraint_violation << res.converged << res.rounds << res.iterations;
        all_converged = all_converged && res.converged;
        rates.push_back(res.value);
        CsvTable p({"s", "g", "phi_dot"});
        for (int m = 0; m < res.path.grid.n_nodes(); ++m)
            p.row() << res.path.grid.node(m) << res.path.values(m, 0) << res.control.values(m, 0);
        run.emit(p, "action_path_" + std::to_string(i) + ".csv");
    }
    run.emit(t, "action.csv");
    run.check("every minimum-action search converged", all_converged,
              std::to_string(sc.ldp.terminals.size()) + " terminals");

    // Y-endpoint rates; by default psi = u(T, terminal). J and I are compared only
    // when u(T, .) is strictly monotone, so that terminal is the unique preimage.
    const Eigen::RowVectorXd uT = inv.u.row(inv.tgrid.n_steps());
    const Eigen::RowVectorXd jumps = uT.tail(uT.size() - 1) - uT.head(uT.size() - 1);
    const bool monotone = (jumps.array() > 0.0).all() || (jumps.array() < 0.0).all();
    const bool derived = sc.ldp.psi_terminals.empty();
    std::vector<double> psis = sc.ldp.psi_terminals;
    if (derived)
        for (const auto& term : sc.ldp.terminals) psis.push_back(field_at(inv, T, term[0]).value);
    CsvTable y({"psi", "rate_value", "constraint_violation", "converged", "preimage_rate"});
    double worst = 0.0;
    for (std::size_t i = 0; i < psis.size(); ++i) {
        const ActionResult res = run.timed("action", [&] { return rate_for_Y(psis[i], ode, inv, sc.ldp.action_tol); });
        const double pre = derived && monotone ? rates[i] : std::numeric_limits<double>::quiet_NaN();
        y.row() << psis[i] << res.value << res.constraint_violation << res.converged << pre;
        if (derived && pre > 0.0) worst = std::max(worst, std::abs(res.value - pre) / pre);
    }
    run.emit(y, "rate_y.csv");
    if (derived && monotone)
        run.check("J(u(T, x*)) matches I(x*) within 5%", worst <= 0.05, "max relative gap " + format_real(worst));
    else if (derived)
        run.notes().push_back("action: u(T, .) is not strictly monotone, J is not compared with I");
}

void stage_rare_event(Run& run) {
    const Scenario& sc = run.scenario();
    if (sc.problem.d() != 1 || sc.problem.k() != 1) throw input_error("rare-event needs d = k = 1");
    if (!sc.ldp.tube_terminal) throw input_error("rare-event needs ldp.tube_terminal in the scenario");
    const DecouplingField& inv = run.inviscid();
    const ControlledODE ode = ControlledODE::from_field(sc.problem, inv);

    // Tube centre: the minimum-action path to the requested endpoint.
    const ActionResult ref = run.timed("rare_event.reference", [&] {
        return minimize_action(ode, SmallVec::Constant(1, (*sc.ldp.tube_terminal)[0]), sc.ldp.action_tol);
    });
    if (!ref.converged) throw ConvergenceError("minimum-action search for the tube centre did not converge");
    CsvTable rp({"s", "g"});
    for (int m = 0; m < ref.path.grid.n_nodes(); ++m) rp.row() << ref.path.grid.node(m) << ref.path.values(m, 0);
    run.emit(rp, "rare_event_reference.csv");

    RareEventReport report;
    report.delta = sc.ldp.delta;
    report.predicted = predict_tube_exponent(ref.path, ode);
    const auto& fields = run.viscous_fields();
    const RandomSource src(sc.montecarlo.master_seed);
    for (const DecouplingField& f : fields) {
        RareEventRow row;
        row.eps = f.epsilon;
        row.estimate = run.timed("rare_event.tubes", [&] {
            return tube_probability(sc.problem, f, f.epsilon, ref.path, sc.ldp.delta, sc.montecarlo.n_paths, src);
        });
        row.usable = row.estimate.successes > 0;
        row.neg_eps_log_p = row.usable ? -f.epsilon * std::log(row.estimate.p_hat)
                                       : std::numeric_limits<double>::quiet_NaN();
        report.rows.push_back(row);
    }
    CsvTable t({"eps", "log_eps", "n_paths", "successes", "p_hat", "wilson_lower", "wilson_upper", "neg_eps_log_p",
                "usable"});
    for (const RareEventRow& r : report.rows)
        t.row() << r.eps << std::log(r.eps) << r.estimate.n_paths << r.estimate.successes << r.estimate.p_hat
                << r.estimate.lower << r.estimate.upper << r.neg_eps_log_p << r.usable;
    run.emit(t, "rare_event.csv");

    const ExponentFit fit = exponent_fit(report);
    CsvTable e({"predicted_rate", "delta", "extrapolated_exponent", "slope", "agreement_ratio", "zero_rate",
                "usable_rows"});
    e.row() << report.predicted << report.delta << fit.extrapolated << fit.slope << fit.agreement_ratio
            << fit.zero_rate << fit.usable_rows;
    run.emit(e, "exponent_fit.csv");
    run.check("tube exponent agrees with the predicted rate (ratio in [0.7, 1.3])",
              in_range(fit.agreement_ratio, 0.7, 1.3),
              "ratio " + format_real(fit.agreement_ratio) + ", predicted " + format_real(report.predicted));
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Input: return kExitInput;
        case ErrorKind::Numerical: return kExitNumerical;
        case ErrorKind::Io: return kExitIo;
    }
    return kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& log, std::ostream& err) {
    CLI::App app{"fblab: small-noise forward-backward SDE laboratory"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string scenario_src, out_dir = "fblab_out", eps_text;
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
    std::optional<double> dt;
    int threads = 0;
    bool quiet = false;
    app.add_option("--scenario", scenario_src, "scenario JSON file or built-in name")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "master seed override");
    app.add_option("--paths", paths, "number of Monte-Carlo paths override");
    app.add_option("--eps", eps_text, "comma-separated epsilon list override (descending)");
    app.add_option("--dt", dt, "time step override; must divide T - t0");
    app.add_option("--threads", threads, "worker threads (default: hardware concurrency)")->check(CLI::NonNegativeNumber);
    app.add_flag("--quiet", quiet, "suppress progress messages");

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"validate", "probe the coefficient assumptions"},
        {"pde", "solve the viscous decoupling equation for every eps"},
        {"limit", "solve the eps -> 0 boundary-value problem and the inviscid field"},
        {"simulate", "simulate the forward-backward ensembles"},
        {"sweep", "measure the convergence norms across eps"},
        {"action", "minimum-action paths and Y-endpoint rates"},
        {"rare-event", "Monte-Carlo tube probabilities and the exponent fit"},
        {"all", "run every stage"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        log << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        log << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "fblab: " << e.what() << "\n";
        return kExitInput;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    std::optional<Run> run;
    try {
        if (threads > 0) set_worker_count(threads);
        Scenario sc = load_scenario(scenario_src);
        Overrides ov{seed, paths, std::nullopt, dt};
        if (!eps_text.empty()) ov.epsilons = parse_real_list(eps_text);
        apply_overrides(sc, ov);
        resolve_mesh(sc);
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec || !fs::is_directory(out_dir))
            throw Error(ErrorKind::Io, "cannot create output directory " + out_dir);
        run.emplace(std::move(sc), fs::path(out_dir), quiet, log);
    } catch (const Error& e) {
        err << "fblab: " << e.what() << "\n";
        return exit_code_for(e);
    }

    int code = kExitOk;
    std::string message;
    try {
        if (sub == "validate") {
            if (!stage_validate(*run)) code = kExitInput;
        } else if (sub == "pde") {
            stage_pde(*run);
        } else if (sub == "limit") {
            stage_limit(*run);
        } else if (sub == "simulate") {
            stage_simulate(*run);
        } else if (sub == "sweep") {
            stage_sweep(*run);
        } else if (sub == "action") {
            stage_action(*run);
        } else if (sub == "rare-event") {
            stage_rare_event(*run);
        } else {
            const Scenario& sc = run->scenario();
            stage_validate(*run);
            stage_pde(*run);
            stage_limit(*run);
            if (sc.problem.d() == 1 && sc.problem.k() == 1) {
                stage_simulate(*run);
                stage_sweep(*run);
                if (!sc.ldp.terminals.empty()) stage_action(*run);
                if (sc.ldp.tube_terminal) stage_rare_event(*run);
            }
        }
        if (code != kExitOk) message = "assumption probes reported violations";
    } catch (const Error& e) {
        code = exit_code_for(e);
        message = e.what();
    } catch (const std::exception& e) {
        code = kExitNumerical;
        message = e.what();
    }
    if (!message.empty()) err << "fblab: " << message << "\n";
    try {
        run->finish(sub, code, message);
    } catch (const Error& e) {
        err << "fblab: " << e.what() << "\n";
        return kExitIo;
    }
    return code;
}

}  // namespace fblab
