#include "fblab/pde.hpp"

#include "fblab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fblab {

FrozenSlice freeze_coefficients(const ProblemSpec& spec, double eps, double s, const SpatialGrid& xg,
                                const Eigen::Ref<const Eigen::RowVectorXd>& u,
                                const Eigen::Ref<const Eigen::RowVectorXd>& du_dx) {
    const int n = xg.n_nodes();
    FrozenSlice c{Eigen::RowVectorXd(n), Eigen::RowVectorXd(n), Eigen::RowVectorXd(n)};
    const double root_eps = std::sqrt(eps);
    for (int j = 0; j < n; ++j) {
        const double x = xg.node(j);
        const double sigma = spec.diffusion1(s, x, u[j]);
        c.velocity[j] = spec.drift1(s, x, u[j]);
        c.diffusivity[j] = sigma * sigma;
        c.source[j] = spec.driver1(s, x, u[j], root_eps * du_dx[j] * sigma);
    }
    return c;
}

Eigen::RowVectorXd backward_step(const SpatialGrid& xg, double dt, double eps, const FrozenSlice& coeffs,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& u_next) {
    const int N = xg.n_cells();
    const double dx = xg.dx();

    const double max_speed = coeffs.velocity.cwiseAbs().maxCoeff();
    if (max_speed * dt > dx * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "CFL bound max|f|*dt <= dx violated: max|f|*dt = " << max_speed * dt << " > dx = " << dx;
        throw CflViolation(msg.str());
    }

    // Ghost nodes mirror the neighbours: u_{-1} = u_1, u_{N+1} = u_{N-1}.
    auto value = [&](int j) {
        if (j < 0) return u_next[1];
        if (j > N) return u_next[N - 1];
        return u_next[j];
    };

    Eigen::RowVectorXd rhs(N + 1), sub(N + 1), diag(N + 1), sup(N + 1);
    for (int j = 0; j <= N; ++j) {
        const double f = coeffs.velocity[j];
        // Information travels along dX = f ds, so u(s, x) reads u(s + ds, x + f ds).
        const double slope = f > 0.0 ? (value(j + 1) - value(j)) / dx : (value(j) - value(j - 1)) / dx;
        rhs[j] = u_next[j] + dt * (f * slope + coeffs.source[j]);
        const double lam = 0.5 * dt * eps * coeffs.diffusivity[j] / (dx * dx);
        diag[j] = 1.0 + 2.0 * lam;
        sub[j] = -lam;
        sup[j] = -lam;
    }
    // Mirror ghosts fold into the first and last rows.
    sup[0] *= 2.0;
    sub[N] *= 2.0;

    // Thomas algorithm.
    for (int j = 1; j <= N; ++j) {
        const double w = sub[j] / diag[j - 1];
        diag[j] -= w * sup[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    Eigen::RowVectorXd u(N + 1);
    u[N] = rhs[N] / diag[N];
    for (int j = N - 1; j >= 0; --j) u[j] = (rhs[j] - sup[j] * u[j + 1]) / diag[j];
    return u;
}

DecouplingField solve_viscous(const ProblemSpec& spec, double eps, const TimeGrid& tgrid, const SpatialGrid& xgrid) {
    require_scalar_problem(spec, "solve_viscous");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw input_error("epsilon must be finite and non-negative");

    DecouplingField field(eps, tgrid, xgrid);
    const int n = tgrid.n_steps();
    for (int j = 0; j < xgrid.n_nodes(); ++j) field.u(n, j) = spec.terminal1(xgrid.node(j));
    central_gradient(xgrid, field.u.row(n), field.du_dx.row(n));

    for (int m = n - 1; m >= 0; --m) {
        FrozenSlice c;
        try {
            c = freeze_coefficients(spec, eps, tgrid.node(m + 1), xgrid, field.u.row(m + 1), field.du_dx.row(m + 1));
        } catch (const DomainError& e) {
            throw DivergenceError(std::string(e.what()) + " at time node " + std::to_string(m + 1), m + 1);
        }
        field.u.row(m) = backward_step(xgrid, tgrid.dt(), eps, c, field.u.row(m + 1));
        if (!field.u.row(m).allFinite())
            throw DivergenceError("non-finite slice at time node " + std::to_string(m), m);
        central_gradient(xgrid, field.u.row(m), field.du_dx.row(m));
    }
    return field;
}

SpatialGrid suggest_spatial_grid(const ProblemSpec& spec, double max_eps, double growth_bound, double cell_width) {
    require_scalar_problem(spec, "suggest_spatial_grid");
    const double tau = spec.horizon();
    const double x0 = spec.x0()[0];
    double h_sup = 0.0;
    for (int i = -50; i <= 50; ++i) h_sup = std::max(h_sup, std::abs(spec.terminal1(x0 + 0.1 * i)));
    const double drift_reach = growth_bound * (1.0 + h_sup) * tau;
    const double noise_reach = 4.0 * std::sqrt(max_eps * tau) * std::max(1.0, growth_bound);
    // The working region is the middle 60% of the mesh, centred on x0.
    const double half = std::max(1.0, (drift_reach + noise_reach) / (1.0 - 2.0 * SpatialGrid::kMargin));
    const int cells = std::max(4, static_cast<int>(std::ceil(2.0 * half / cell_width)));
    return SpatialGrid(x0 - half, x0 + half, cells);
}

}  // namespace fblab
