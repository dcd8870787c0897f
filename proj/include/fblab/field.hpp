#pragma once

#include "fblab/grid.hpp"

#include <Eigen/Dense>

namespace fblab {

/// Grid samples of a scalar (k = 1) decoupling field u(s, x) on [t0, T] x [x_min, x_max]
/// and of its spatial gradient. Rows are time nodes, columns space nodes.
struct DecouplingField {
    double epsilon = 0.0;
    TimeGrid tgrid;
    SpatialGrid xgrid;
    Eigen::MatrixXd u;
    Eigen::MatrixXd du_dx;

    DecouplingField(double eps, TimeGrid tg, SpatialGrid xg)
        : epsilon(eps), tgrid(tg), xgrid(xg), u(tg.n_nodes(), xg.n_nodes()), du_dx(tg.n_nodes(), xg.n_nodes()) {}
};

/// Central differences in the interior, one-sided at the two ends.
void central_gradient(const SpatialGrid& xg, const Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>& u,
                      Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> du_dx);

struct ScalarSample {
    double value = 0.0;
    double gradient = 0.0;
    bool clamped = false;  ///< x fell outside the mesh and was clamped
};

/// Value and gradient at (s, x), bilinear in (s, x). Queries outside the mesh
/// are clamped to the boundary and flagged.
ScalarSample field_at(const DecouplingField& field, double s, double x);

/// Same as field_at with s = node m of the time grid (no time interpolation).
ScalarSample field_at_node(const DecouplingField& field, int m, double x);

/// Largest |u - v| over nodes that lie in the working region of both meshes.
/// Fields must share both grids.
double interior_sup_distance(const DecouplingField& a, const DecouplingField& b);

}  // namespace fblab
