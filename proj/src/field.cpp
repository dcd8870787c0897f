#include "fblab/field.hpp"

#include "fblab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fblab {

void central_gradient(const SpatialGrid& xg, const Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>& u,
                      Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> du_dx) {
    const int N = xg.n_cells();
    const double dx = xg.dx();
    du_dx[0] = (u[1] - u[0]) / dx;
    du_dx[N] = (u[N] - u[N - 1]) / dx;
    for (int j = 1; j < N; ++j) du_dx[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
}

namespace {

// Cell index and weight of the right node; snaps to a node when within 1e-9 cells.
struct Locate {
    int index = 0;
    double weight = 0.0;
    bool clamped = false;
};

Locate locate(double r, int n_cells) {
    Locate loc;
    if (r <= 0.0) {
        loc.clamped = r < 0.0;
        return loc;
    }
    if (r >= n_cells) {
        loc.clamped = r > n_cells;
        loc.index = n_cells;
        return loc;
    }
    const double nearest = std::round(r);
    if (std::abs(r - nearest) < 1e-9) {
        loc.index = static_cast<int>(nearest);
        return loc;
    }
    loc.index = static_cast<int>(std::floor(r));
    loc.weight = r - loc.index;
    return loc;
}

double lerp_row(const Eigen::MatrixXd& m, int row, const Locate& x) {
    if (x.weight == 0.0) return m(row, x.index);
    return (1.0 - x.weight) * m(row, x.index) + x.weight * m(row, x.index + 1);
}

}  // namespace

ScalarSample field_at_node(const DecouplingField& field, int m, double x) {
    const Locate lx = locate((x - field.xgrid.x_min()) / field.xgrid.dx(), field.xgrid.n_cells());
    return {lerp_row(field.u, m, lx), lerp_row(field.du_dx, m, lx), lx.clamped};
}

ScalarSample field_at(const DecouplingField& field, double s, double x) {
    const Locate ls = locate((s - field.tgrid.t0()) / field.tgrid.dt(), field.tgrid.n_steps());
    const Locate lx = locate((x - field.xgrid.x_min()) / field.xgrid.dx(), field.xgrid.n_cells());
    ScalarSample out;
    out.clamped = lx.clamped || ls.clamped;
    const double u0 = lerp_row(field.u, ls.index, lx);
    const double g0 = lerp_row(field.du_dx, ls.index, lx);
    if (ls.weight == 0.0) {
        out.value = u0;
        out.gradient = g0;
        return out;
    }
    const double u1 = lerp_row(field.u, ls.index + 1, lx);
    const double g1 = lerp_row(field.du_dx, ls.index + 1, lx);
    out.value = (1.0 - ls.weight) * u0 + ls.weight * u1;
    out.gradient = (1.0 - ls.weight) * g0 + ls.weight * g1;
    return out;
}

double interior_sup_distance(const DecouplingField& a, const DecouplingField& b) {
    if (!(a.tgrid == b.tgrid) || !(a.xgrid == b.xgrid)) throw GridMismatch("fields live on different grids");
    double worst = 0.0;
    for (int j = 0; j < a.xgrid.n_nodes(); ++j) {
        if (!a.xgrid.in_working_region(a.xgrid.node(j))) continue;
        worst = std::max(worst, (a.u.col(j) - b.u.col(j)).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace fblab
