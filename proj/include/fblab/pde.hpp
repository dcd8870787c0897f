#pragma once

#include "fblab/field.hpp"
#include "fblab/problem.hpp"

#include <Eigen/Dense>

namespace fblab {

/// Coefficients of the linear backward step, frozen on one time slice:
///   u_s + (eps/2) a u_xx + velocity u_x + source = 0.
struct FrozenSlice {
    Eigen::RowVectorXd velocity;     ///< f(s, x, u)
    Eigen::RowVectorXd diffusivity;  ///< a = sigma^2
    Eigen::RowVectorXd source;       ///< g(s, x, u, sqrt(eps) u_x sigma)
};

/// Evaluates the frozen coefficients at time s from a slice u (and its gradient).
FrozenSlice freeze_coefficients(const ProblemSpec& spec, double eps, double s, const SpatialGrid& xg,
                                const Eigen::Ref<const Eigen::RowVectorXd>& u,
                                const Eigen::Ref<const Eigen::RowVectorXd>& du_dx);

/// One backward step of length dt: implicit diffusion (tridiagonal solve),
/// explicit upwinded advection and explicit source, zero-gradient ends.
/// Throws CflViolation when max|velocity| dt > dx.
Eigen::RowVectorXd backward_step(const SpatialGrid& xg, double dt, double eps, const FrozenSlice& coeffs,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& u_next);

/// Solves the viscous decoupling equation backward from u(T, .) = h on the
/// truncated mesh; coefficients are frozen at the later slice of every step.
/// Requires d = k = 1 and eps >= 0. Throws CflViolation or DivergenceError
/// (with the time node of the first non-finite slice).
DecouplingField solve_viscous(const ProblemSpec& spec, double eps, const TimeGrid& tgrid, const SpatialGrid& xgrid);

/// Mesh wide enough that the forward SDE under the largest eps leaves the
/// working region with probability below 1e-4: a 4-sigma Gaussian excursion
/// plus the drift displacement bound Lambda (1 + |y|) (T - t0), with |y|
/// bounded by the sampled sup of h.
SpatialGrid suggest_spatial_grid(const ProblemSpec& spec, double max_eps, double growth_bound, double cell_width);

}  // namespace fblab
