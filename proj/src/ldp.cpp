#include "fblab/ldp.hpp"

#include "fblab/errors.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace fblab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Residual of the endpoint event, e.g. g_T - terminal.
using Constraint = std::function<SmallVec(const SmallVec&)>;

class PenaltyProblem {
public:
    PenaltyProblem(const ControlledODE& ode, Constraint constraint)
        : ode_(ode), constraint_(std::move(constraint)), n_(ode.grid.n_steps()), d_(ode.dim()) {}

    int n() const { return n_; }
    int d() const { return d_; }

    // Forward Euler from node `from` with the path prefix already in `path`.
    bool integrate(const Eigen::MatrixXd& phi, Eigen::MatrixXd& path, int from) const {
        const double dt = ode_.grid.dt();
        SmallVec g = path.row(from).transpose();
        for (int m = from; m < n_; ++m) {
            const double s = ode_.grid.node(m);
            const SmallVec b = ode_.drift(s, g);
            const SmallMat sig = ode_.dispersion(s, g);
            g += (b + sig * phi.row(m).transpose()) * dt;
            if (!g.allFinite()) return false;
            path.row(m + 1) = g.transpose();
        }
        return true;
    }

    double control_cost(const Eigen::MatrixXd& phi) const { return 0.5 * phi.squaredNorm() * ode_.grid.dt(); }

    double penalty(const Eigen::MatrixXd& path, double mu) const {
        const SmallVec r = constraint_(path.row(n_).transpose());
        return mu * r.squaredNorm();
    }

    double violation(const Eigen::MatrixXd& path) const { return constraint_(path.row(n_).transpose()).norm(); }

    double objective(const Eigen::MatrixXd& phi, Eigen::MatrixXd& path, double mu) const {
        try {
            if (!integrate(phi, path, 0)) return kInf;
            const double v = control_cost(phi) + penalty(path, mu);
            return std::isfinite(v) ? v : kInf;
        } catch (const DomainError&) {
            return kInf;
        }
    }

    // Central differences; a perturbation of phi_m only changes the path after
    // node m, so the prefix of `path` is reused.
    Eigen::MatrixXd fd_gradient(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& path, double mu) const {
        Eigen::MatrixXd grad(n_, d_);
        Eigen::MatrixXd work = phi;
        Eigen::MatrixXd trial = path;
        for (int m = 0; m < n_; ++m) {
            for (int c = 0; c < d_; ++c) {
                const double h = 1e-6 * std::max(1.0, std::abs(phi(m, c)));
                double f[2];
                for (int side = 0; side < 2; ++side) {
                    work(m, c) = phi(m, c) + (side == 0 ? h : -h);
                    try {
                        f[side] = integrate(work, trial, m) ? control_cost(work) + penalty(trial, mu) : kInf;
                    } catch (const DomainError&) {
                        f[side] = kInf;
                    }
                }
                work(m, c) = phi(m, c);
                grad(m, c) = (f[0] - f[1]) / (2.0 * h);
            }
        }
        return grad;
    }

private:
    const ControlledODE& ode_;
    Constraint constraint_;
    int n_;
    int d_;
};

ActionResult run_penalty(const ControlledODE& ode, const Constraint& constraint, double tol,
                         const ActionOptions& opt) {
    if (!(tol > 0.0)) throw input_error("action tolerance must be positive");
    const PenaltyProblem prob(ode, constraint);
    const int n = prob.n();
    const int d = prob.d();
    const double dt = ode.grid.dt();

    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, d);
    Eigen::MatrixXd path(n + 1, d);
    path.row(0) = ode.x0.transpose();
    Eigen::MatrixXd trial_path = path;

    ActionResult res(ode.grid, d);
    bool round_converged = false;
    double mu = opt.mu0;
    for (int round = 0; round < opt.max_rounds; ++round, mu *= 2.0) {
        res.rounds = round + 1;
        double F = prob.objective(phi, path, mu);
        if (!std::isfinite(F)) throw numerical_error("action objective is not finite at the starting control");
        std::deque<double> history{F};
        round_converged = false;
        for (int it = 0; it < opt.max_iterations_per_round; ++it) {
            // Riesz representative of the derivative in the discrete L2 inner product.
            const Eigen::MatrixXd G = prob.fd_gradient(phi, path, mu) / dt;
            const double gnorm2 = G.squaredNorm() * dt;
            if (!(gnorm2 > 0.0) || !std::isfinite(gnorm2)) {
                round_converged = true;
                break;
            }
            bool accepted = false;
            for (double alpha = 1.0; alpha > 1e-20; alpha *= 0.5) {
                const Eigen::MatrixXd trial = phi - alpha * G;
                const double Ft = prob.objective(trial, trial_path, mu);
                if (Ft <= F - 0.25 * alpha * gnorm2) {
                    phi = trial;
                    path.swap(trial_path);
                    F = Ft;
                    accepted = true;
                    break;
                }
            }
            ++res.iterations;
            if (!accepted) {
                round_converged = true;
                break;
            }
            history.push_back(F);
            if (static_cast<int>(history.size()) > opt.window) {
                const double old = history.front();
                history.pop_front();
                if (std::abs(old - F) <= opt.relative_change * std::max(std::abs(F), 1e-300)) {
                    round_converged = true;
                    break;
                }
            }
        }
        prob.objective(phi, path, mu);
        res.constraint_violation = prob.violation(path);
        if (res.constraint_violation <= tol) break;
    }

    res.value = prob.control_cost(phi);
    res.converged = round_converged && res.constraint_violation <= tol;
    res.path.values = path;
    res.control.values.topRows(n) = phi;
    res.control.values.row(n) = phi.row(n - 1);
    return res;
}

void require_in_box(const ControlledODE& ode, double x, const char* what) {
    if (ode.box && !ode.box->in_working_region(x)) {
        std::ostringstream msg;
        msg << what << " " << x << " is outside the working region of the mesh [" << ode.box->x_min() << ", "
            << ode.box->x_max() << "]";
        throw input_error(msg.str());
    }
}

}  // namespace

ControlledODE ControlledODE::from_field(const ProblemSpec& spec, const DecouplingField& inviscid) {
    require_scalar_problem(spec, "ControlledODE::from_field");
    const ProblemSpec* p = &spec;
    const DecouplingField* fld = &inviscid;
    ControlledODE ode{inviscid.tgrid, SmallVec::Constant(1, spec.x0()[0]), {}, {}, inviscid.xgrid};
    ode.drift = [p, fld](double s, const SmallVec& x) {
        return SmallVec::Constant(1, p->drift1(s, x[0], field_at(*fld, s, x[0]).value));
    };
    ode.dispersion = [p, fld](double s, const SmallVec& x) {
        return SmallMat::Constant(1, 1, p->diffusion1(s, x[0], field_at(*fld, s, x[0]).value));
    };
    return ode;
}

Eigen::MatrixXd recover_control(const Path& g, const ControlledODE& ode) {
    if (!(g.grid == ode.grid) || g.dim() != ode.dim()) throw GridMismatch("path is not on the grid of the controlled ODE");
    if ((g.values.row(0).transpose() - ode.x0).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + ode.x0.cwiseAbs().maxCoeff()))
        throw input_error("path must start at x0");
    const int n = ode.grid.n_steps();
    const double dt = ode.grid.dt();
    Eigen::MatrixXd phi(n, ode.dim());
    for (int m = 0; m < n; ++m) {
        const double s = ode.grid.node(m);
        const SmallVec x = g.values.row(m).transpose();
        const SmallVec velocity = (g.values.row(m + 1) - g.values.row(m)).transpose() / dt;
        const SmallMat sig = ode.dispersion(s, x);
        const Eigen::FullPivLU<SmallMat> lu(sig);
        if (!lu.isInvertible()) throw numerical_error("sigma is singular at time node " + std::to_string(m));
        phi.row(m) = lu.solve(velocity - ode.drift(s, x)).transpose();
    }
    return phi;
}

double action_of_path(const Path& g, const ControlledODE& ode) {
    return 0.5 * recover_control(g, ode).squaredNorm() * ode.grid.dt();
}

ActionResult minimize_action(const ControlledODE& ode, const SmallVec& terminal, double tol, const ActionOptions& options) {
    if (terminal.size() != ode.dim()) throw input_error("terminal must have d entries");
    if (ode.dim() == 1) require_in_box(ode, terminal[0], "terminal");
    return run_penalty(ode, [terminal](const SmallVec& gT) -> SmallVec { return gT - terminal; }, tol, options);
}

ActionResult rate_for_Y(double psi_terminal, const ControlledODE& ode, const DecouplingField& inviscid, double tol,
                        const ActionOptions& options) {
    if (ode.dim() != 1) throw input_error("rate_for_Y supports d = k = 1 only");
    const int n = inviscid.tgrid.n_steps();
    const Eigen::RowVectorXd uT = inviscid.u.row(n);
    if (psi_terminal < uT.minCoeff() || psi_terminal > uT.maxCoeff()) {
        ActionResult res(ode.grid, 1);
        res.value = kInf;
        res.constraint_violation = kInf;
        return res;
    }
    const DecouplingField* fld = &inviscid;
    const double T = inviscid.tgrid.T();
    return run_penalty(
        ode,
        [fld, T, psi_terminal](const SmallVec& gT) -> SmallVec {
            return SmallVec::Constant(1, field_at(*fld, T, gT[0]).value - psi_terminal);
        },
        tol, options);
}

double predict_tube_exponent(const Path& g, const ControlledODE& ode) {
    const double I = action_of_path(g, ode);
    if (!std::isfinite(I)) throw numerical_error("action of the reference path is not finite");
    return I;
}

}  // namespace fblab
