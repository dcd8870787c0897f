#include "fblab/limit.hpp"

#include "fblab/errors.hpp"
#include "fblab/parallel.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace fblab {

namespace {

struct State {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
};

State rhs(const ProblemSpec& spec, double s, const State& st, const Eigen::MatrixXd& zero_z) {
    return {spec.drift(s, st.x, st.y), -spec.driver(s, st.x, st.y, zero_z)};
}

// Scalar RK4 for d = k = 1; avoids all temporaries in the hot loop of inviscid_field.
State sweep_scalar(const ProblemSpec& spec, const TimeGrid& grid, double x, double y, Path* X, Path* Y) {
    const double dt = grid.dt();
    if (X) X->values(0, 0) = x;
    if (Y) Y->values(0, 0) = y;
    auto fx = [&](double s, double a, double b) { return spec.drift1(s, a, b); };
    auto fy = [&](double s, double a, double b) { return -spec.driver1(s, a, b, 0.0); };
    for (int m = 0; m < grid.n_steps(); ++m) {
        const double s = grid.node(m);
        const double h = s + 0.5 * dt;
        const double kx1 = fx(s, x, y), ky1 = fy(s, x, y);
        const double kx2 = fx(h, x + 0.5 * dt * kx1, y + 0.5 * dt * ky1);
        const double ky2 = fy(h, x + 0.5 * dt * kx1, y + 0.5 * dt * ky1);
        const double kx3 = fx(h, x + 0.5 * dt * kx2, y + 0.5 * dt * ky2);
        const double ky3 = fy(h, x + 0.5 * dt * kx2, y + 0.5 * dt * ky2);
        const double kx4 = fx(s + dt, x + dt * kx3, y + dt * ky3);
        const double ky4 = fy(s + dt, x + dt * kx3, y + dt * ky3);
        x += dt / 6.0 * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
        y += dt / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
        if (X) X->values(m + 1, 0) = x;
        if (Y) Y->values(m + 1, 0) = y;
    }
    return {Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Constant(1, y)};
}

// Terminal state of the RK4 sweep; paths are written only when requested.
State sweep(const ProblemSpec& spec, const TimeGrid& grid, const Eigen::VectorXd& x0, const Eigen::VectorXd& c,
            Path* X, Path* Y) {
    if (spec.d() == 1 && spec.k() == 1) return sweep_scalar(spec, grid, x0[0], c[0], X, Y);
    const Eigen::MatrixXd zero_z = Eigen::MatrixXd::Zero(spec.k(), spec.d());
    const double dt = grid.dt();
    State st{x0, c};
    if (X) X->values.row(0) = st.x.transpose();
    if (Y) Y->values.row(0) = st.y.transpose();
    for (int m = 0; m < grid.n_steps(); ++m) {
        const double s = grid.node(m);
        const State k1 = rhs(spec, s, st, zero_z);
        const State k2 = rhs(spec, s + 0.5 * dt, {st.x + 0.5 * dt * k1.x, st.y + 0.5 * dt * k1.y}, zero_z);
        const State k3 = rhs(spec, s + 0.5 * dt, {st.x + 0.5 * dt * k2.x, st.y + 0.5 * dt * k2.y}, zero_z);
        const State k4 = rhs(spec, s + dt, {st.x + dt * k3.x, st.y + dt * k3.y}, zero_z);
        st.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
        st.y += dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
        if (X) X->values.row(m + 1) = st.x.transpose();
        if (Y) Y->values.row(m + 1) = st.y.transpose();
    }
    return st;
}

// Terminal mismatch Y(T) - h(X(T)); nullopt when the sweep leaves the domain of the coefficients.
std::optional<Eigen::VectorXd> mismatch(const ProblemSpec& spec, const TimeGrid& grid, const Eigen::VectorXd& x0,
                                        const Eigen::VectorXd& c) {
    try {
        const State end = sweep(spec, grid, x0, c, nullptr, nullptr);
        Eigen::VectorXd r = end.y - spec.terminal(end.x);
        if (!r.allFinite()) return std::nullopt;
        return r;
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

std::optional<Eigen::MatrixXd> jacobian(const ProblemSpec& spec, const TimeGrid& grid, const Eigen::VectorXd& x0,
                                        const Eigen::VectorXd& c) {
    const int k = spec.k();
    Eigen::MatrixXd J(k, k);
    for (int i = 0; i < k; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(c[i]));
        Eigen::VectorXd cp = c, cm = c;
        cp[i] += h;
        cm[i] -= h;
        auto rp = mismatch(spec, grid, x0, cp);
        auto rm = mismatch(spec, grid, x0, cm);
        if (!rp || !rm) return std::nullopt;
        J.col(i) = (*rp - *rm) / (2.0 * h);
    }
    return J;
}

enum class NewtonStatus { Converged, Stalled, Singular };

struct NewtonOutcome {
    NewtonStatus status = NewtonStatus::Stalled;
    Eigen::VectorXd c;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

NewtonOutcome damped_newton(const ProblemSpec& spec, const TimeGrid& grid, const Eigen::VectorXd& x0,
                            Eigen::VectorXd c, double tol, int max_iterations) {
    NewtonOutcome out;
    auto r = mismatch(spec, grid, x0, c);
    if (!r) {
        out.c = c;
        return out;
    }
    for (int it = 0; it <= max_iterations; ++it) {
        out.c = c;
        out.residual = r->norm();
        out.iterations = it;
        if (out.residual <= tol) {
            out.status = NewtonStatus::Converged;
            return out;
        }
        if (it == max_iterations) break;
        const auto J = jacobian(spec, grid, x0, c);
        if (!J) break;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(*J);
        if (!lu.isInvertible()) {
            out.status = NewtonStatus::Singular;
            return out;
        }
        const Eigen::VectorXd step = lu.solve(*r);
        bool improved = false;
        double lambda = 1.0;
        for (int attempt = 0; attempt < 30; ++attempt, lambda *= 0.5) {
            const Eigen::VectorXd trial = c - lambda * step;
            auto rt = mismatch(spec, grid, x0, trial);
            if (rt && rt->norm() < out.residual) {
                c = trial;
                r = rt;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    out.status = NewtonStatus::Stalled;
    return out;
}

void require_spans(const ProblemSpec& spec, const TimeGrid& grid) {
    const double scale = std::max(1.0, std::abs(spec.T()));
    if (std::abs(grid.t0() - spec.t0()) > 1e-12 * scale || std::abs(grid.T() - spec.T()) > 1e-12 * scale)
        throw GridMismatch("time grid must span [t0, T] of the problem");
}

}  // namespace

std::pair<Path, Path> integrate_characteristics(const ProblemSpec& spec, const TimeGrid& grid, const Eigen::VectorXd& c) {
    Path X(grid, spec.d()), Y(grid, spec.k());
    sweep(spec, grid, spec.x0(), c, &X, &Y);
    return {std::move(X), std::move(Y)};
}

namespace {

// Shooting from (tgrid.t0(), x0); the problem's own start is ignored.
LimitSolution shoot_from(const ProblemSpec& spec, const TimeGrid& tgrid, const Eigen::VectorXd& x0,
                         const ShootOptions& options) {
    Eigen::VectorXd guess;
    try {
        guess = spec.terminal(x0);
    } catch (const DomainError& e) {
        throw ConvergenceError(std::string("initial guess h(x0) undefined: ") + e.what());
    }

    NewtonOutcome result = damped_newton(spec, tgrid, x0, guess, options.tol, options.max_iterations);
    bool homotopy = false;
    if (result.status == NewtonStatus::Stalled) {
        // Continuation in the horizon: solve on [T - j tau / J, T] from x0 for j = 1..J.
        homotopy = true;
        Eigen::VectorXd c = guess;
        const int J = std::max(2, options.homotopy_stages);
        for (int j = 1; j <= J; ++j) {
            const double start = j == J ? tgrid.t0() : tgrid.T() - (tgrid.T() - tgrid.t0()) * j / J;
            const int steps = j == J ? tgrid.n_steps() : std::max(1, tgrid.n_steps() * j / J);
            const TimeGrid stage(start, tgrid.T(), steps);
            result = damped_newton(spec, stage, x0, c, options.tol, options.max_iterations);
            if (result.status != NewtonStatus::Converged) break;
            c = result.c;
        }
    }
    if (result.status == NewtonStatus::Singular)
        throw ConvergenceError("shooting Jacobian singular after damping attempts");
    if (result.status != NewtonStatus::Converged) {
        std::ostringstream msg;
        msg << "shooting did not converge: residual " << result.residual << " > tol " << options.tol;
        throw ConvergenceError(msg.str());
    }

    LimitSolution sol{tgrid, Path(tgrid, spec.d()), Path(tgrid, spec.k()), result.c, 0.0, result.iterations, homotopy};
    const State end = sweep(spec, tgrid, x0, result.c, &sol.X, &sol.Y);
    sol.residual = (end.y - spec.terminal(end.x)).norm();
    return sol;
}

}  // namespace

LimitSolution shoot(const ProblemSpec& spec, const TimeGrid& tgrid, const ShootOptions& options) {
    if (!(options.tol > 0.0)) throw input_error("shooting tolerance must be positive");
    require_spans(spec, tgrid);
    return shoot_from(spec, tgrid, spec.x0(), options);
}

DecouplingField inviscid_field(const ProblemSpec& spec, const TimeGrid& tgrid, const SpatialGrid& xgrid,
                               const ShootOptions& options) {
    require_scalar_problem(spec, "inviscid_field");
    if (!(options.tol > 0.0)) throw input_error("shooting tolerance must be positive");
    require_spans(spec, tgrid);
    DecouplingField field(0.0, tgrid, xgrid);
    const int n = tgrid.n_steps();
    const auto n_space = static_cast<std::size_t>(xgrid.n_nodes());

    parallel_for(static_cast<std::size_t>(tgrid.n_nodes()) * n_space, [&](std::size_t idx) {
        const int i = static_cast<int>(idx / n_space);
        const int j = static_cast<int>(idx % n_space);
        const double x = xgrid.node(j);
        if (i == n) {
            field.u(i, j) = spec.terminal1(x);
            return;
        }
        const double s = tgrid.node(i);
        try {
            field.u(i, j) = shoot_from(spec, TimeGrid(s, tgrid.T(), n - i), Eigen::VectorXd::Constant(1, x), options).u0[0];
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << e.what() << " (node s = " << s << ", x = " << x << ")";
            throw ConvergenceError(msg.str());
        }
    });
    for (int i = 0; i <= n; ++i) central_gradient(xgrid, field.u.row(i), field.du_dx.row(i));
    return field;
}

UniquenessProbe verify_uniqueness_probe(const ProblemSpec& spec, const TimeGrid& tgrid,
                                        const std::vector<Eigen::VectorXd>& c_grid, double tol) {
    require_spans(spec, tgrid);
    std::vector<NewtonOutcome> outcomes(c_grid.size());
    parallel_for(c_grid.size(), [&](std::size_t i) {
        outcomes[i] = damped_newton(spec, tgrid, spec.x0(), c_grid[i], tol, 100);
    });

    UniquenessProbe probe;
    for (const NewtonOutcome& o : outcomes) {
        if (o.status != NewtonStatus::Converged) {
            ++probe.failed_candidates;
            continue;
        }
        bool merged = false;
        for (RootCluster& cl : probe.roots) {
            if ((cl.root - o.c).norm() <= 1e-6 * (1.0 + cl.root.norm())) {
                ++cl.hits;
                merged = true;
                break;
            }
        }
        if (!merged) probe.roots.push_back({o.c, o.residual, 1, 0.0});
    }
    for (RootCluster& cl : probe.roots) {
        if (auto J = jacobian(spec, tgrid, spec.x0(), cl.root)) {
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(*J);
            const double smin = svd.singularValues().minCoeff();
            cl.inverse_jacobian_norm = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
        }
    }
    return probe;
}

}  // namespace fblab
