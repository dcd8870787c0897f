#pragma once

#include "fblab/field.hpp"
#include "fblab/path.hpp"
#include "fblab/problem.hpp"

#include <vector>

namespace fblab {

/// Deterministic eps -> 0 limit: X' = f(s, X, Y), Y' = -g(s, X, Y, 0),
/// X(t0) = x0, Y(T) = h(X(T)).
struct LimitSolution {
    TimeGrid grid;
    Path X;
    Path Y;
    Eigen::VectorXd u0;   ///< Y(t0)
    double residual = 0;  ///< |Y(T) - h(X(T))|
    int newton_iterations = 0;
    bool used_homotopy = false;
};

struct ShootOptions {
    double tol = 1e-12;
    int max_iterations = 50;
    int homotopy_stages = 8;
};

/// Integrates the characteristic system forward from (x0, c) with classical RK4.
/// Returns the (X, Y) paths on `grid`.
std::pair<Path, Path> integrate_characteristics(const ProblemSpec& spec, const TimeGrid& grid, const Eigen::VectorXd& c);

/// Finds Y(t0) = c by damped Newton on the terminal mismatch, starting from
/// c = h(x0); falls back to continuation in the horizon length when Newton stalls.
/// `tgrid` must span [spec.t0(), spec.T()]. Throws ConvergenceError.
LimitSolution shoot(const ProblemSpec& spec, const TimeGrid& tgrid, const ShootOptions& options = {});

/// u(s, x) = Y_s^{s,x} on every node of the mesh (eps = 0), gradient by central
/// differences. Requires d = k = 1. Shooting failures name the failing node.
DecouplingField inviscid_field(const ProblemSpec& spec, const TimeGrid& tgrid, const SpatialGrid& xgrid,
                               const ShootOptions& options = {});

struct RootCluster {
    Eigen::VectorXd root;
    double residual = 0.0;
    int hits = 0;                       ///< candidates that converged here
    double inverse_jacobian_norm = 0.0; ///< ||J^-1||_2 of the mismatch Jacobian at the root
};

struct UniquenessProbe {
    std::vector<RootCluster> roots;
    int failed_candidates = 0;  ///< candidates whose local Newton did not converge
};

/// Runs undamped-start local Newton from every candidate c and clusters the
/// converged roots. Reports every distinct root; selects none.
UniquenessProbe verify_uniqueness_probe(const ProblemSpec& spec, const TimeGrid& tgrid,
                                        const std::vector<Eigen::VectorXd>& c_grid, double tol = 1e-10);

}  // namespace fblab
