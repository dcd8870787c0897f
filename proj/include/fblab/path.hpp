#pragma once

#include "fblab/grid.hpp"

#include <Eigen/Dense>

namespace fblab {

/// Values of one process on a time grid: one row per node, one column per component.
struct Path {
    TimeGrid grid;
    Eigen::MatrixXd values;

    Path(TimeGrid g, int dim) : grid(g), values(Eigen::MatrixXd::Zero(g.n_nodes(), dim)) {}
    Path(TimeGrid g, Eigen::MatrixXd v) : grid(g), values(std::move(v)) {
        if (values.rows() != grid.n_nodes()) throw input_error("path needs one row per grid node");
    }

    int dim() const { return static_cast<int>(values.cols()); }
    auto at(int m) const { return values.row(m); }
};

/// max_m |a_m - b_m|^2 over node rows.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sup_norm_sq(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    return (a - b).rowwise().squaredNorm().maxCoeff();
}

/// Left-endpoint sum_{m < n} |a_m - b_m|^2 dt over node rows (the last row is not used).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar l2_norm_sq(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                     typename DerivedA::Scalar dt) {
    const auto n = a.rows() - 1;
    return (a.topRows(n) - b.topRows(n)).rowwise().squaredNorm().sum() * dt;
}

inline void require_same_grid(const Path& a, const Path& b) {
    if (!(a.grid == b.grid) || a.dim() != b.dim()) throw GridMismatch("paths live on different grids");
}

inline double sup_norm_sq(const Path& a, const Path& b) {
    require_same_grid(a, b);
    return sup_norm_sq(a.values, b.values);
}

inline double l2_norm_sq(const Path& a, const Path& b) {
    require_same_grid(a, b);
    return l2_norm_sq(a.values, b.values, a.grid.dt());
}

}  // namespace fblab
