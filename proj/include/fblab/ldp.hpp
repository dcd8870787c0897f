#pragma once

#include "fblab/field.hpp"
#include "fblab/path.hpp"
#include "fblab/problem.hpp"

#include <functional>
#include <optional>

namespace fblab {

/// Fixed-capacity vectors keep the inner loops of the minimizer free of heap traffic.
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDimension, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDimension, kMaxDimension>;

/// g' = b(s, g) + sigma(s, g) phi', g(t0) = x0, on a fixed time grid.
struct ControlledODE {
    TimeGrid grid;
    SmallVec x0;
    std::function<SmallVec(double, const SmallVec&)> drift;
    std::function<SmallMat(double, const SmallVec&)> dispersion;
    /// Optional mesh whose working region terminals must lie in.
    std::optional<SpatialGrid> box;

    int dim() const { return static_cast<int>(x0.size()); }

    /// b(s, x) = f(s, x, u(s, x)) and sigma(s, x) = sigma(s, x, u(s, x)) with u the
    /// inviscid field; grid and box are taken from the field.
    static ControlledODE from_field(const ProblemSpec& spec, const DecouplingField& inviscid);
};

struct ActionResult {
    ActionResult(const TimeGrid& grid, int d) : path(grid, d), control(grid, d) {}

    double value = 0.0;  ///< I or J; +infinity for an infeasible event
    Path path;           ///< minimizing X-path
    Path control;        ///< phi' per step; the last row repeats the last step
    bool converged = false;
    double constraint_violation = 0.0;
    int rounds = 0;       ///< penalty rounds used
    int iterations = 0;   ///< gradient steps over all rounds
};

struct ActionOptions {
    double mu0 = 1.0;
    int max_rounds = 20;
    int max_iterations_per_round = 5000;
    double relative_change = 1e-8;  ///< over a window of `window` iterations
    int window = 10;
};

/// 1/2 sum |phi'_m|^2 dt with phi'_m = sigma(s_m, g_m)^-1 ((g_{m+1} - g_m)/dt - b(s_m, g_m)).
/// Throws GridMismatch when g is not on the ODE grid, input error when g does
/// not start at x0, and a numerical error when sigma is singular at a node.
double action_of_path(const Path& g, const ControlledODE& ode);

/// The controls recovered by action_of_path, one row per step.
Eigen::MatrixXd recover_control(const Path& g, const ControlledODE& ode);

/// inf I(g) subject to g(T) = terminal, by penalty continuation (mu doubled
/// each round) and gradient descent on the grid controls with central
/// finite-difference gradients. Returns the best point when the budget runs out.
ActionResult minimize_action(const ControlledODE& ode, const SmallVec& terminal, double tol,
                             const ActionOptions& options = {});

/// J(psi) for the event u(T, g_T) = psi (k = 1, d = 1). Infeasible when psi lies
/// outside the range of u(T, .) on the mesh: value = +infinity, converged = false.
ActionResult rate_for_Y(double psi_terminal, const ControlledODE& ode, const DecouplingField& inviscid, double tol,
                        const ActionOptions& options = {});

/// Predicted decay rate of P(sup |X - g| < delta) for small delta, i.e. I(g).
double predict_tube_exponent(const Path& g, const ControlledODE& ode);

}  // namespace fblab
