#pragma once

#include "fblab/field.hpp"
#include "fblab/problem.hpp"
#include "fblab/random.hpp"

#include <cstdint>
#include <vector>

namespace fblab {

/// Forward SDE with the decoupling field substituted for Y:
///   dX = f(s, X, u(s, X)) ds + sqrt(eps) sigma(s, X, u(s, X)) dB.
class EffectiveSDE {
public:
    EffectiveSDE(const ProblemSpec& spec, const DecouplingField& field);

    const DecouplingField& field() const { return *field_; }
    double drift(double s, double x) const;
    double diffusion(double s, double x) const;

private:
    const ProblemSpec* spec_;
    const DecouplingField* field_;
};

/// Sampled (X, Y, Z) for a scalar problem: one row per path, one column per
/// time node. Holds enough seed metadata to regenerate every increment.
struct TrajectoryEnsemble {
    double epsilon = 0.0;
    TimeGrid grid{0.0, 1.0, 1};
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
    Eigen::MatrixXd Z;
    std::uint64_t master_seed = 0;
    std::uint64_t first_stream = 0;  ///< path i uses stream first_stream + i
    long exits = 0;                  ///< paths that left the mesh at some node
    long clamps = 0;                 ///< field queries clamped to the mesh boundary

    int n_paths() const { return static_cast<int>(X.rows()); }
};

/// Four-step scheme: Euler-Maruyama on the effective SDE with Y = u(s, X) and
/// Z = sqrt(eps) u_x sigma read off the field at every node. Requires
/// field.epsilon == eps and d = k = 1. Fails when more than 0.1% of the paths
/// leave the mesh.
TrajectoryEnsemble simulate(const ProblemSpec& spec, const DecouplingField& field, double eps, int n_paths,
                            const RandomSource& src, std::uint64_t first_stream = 0);

struct PicardResult {
    DecouplingField field;
    int iterations = 0;
    std::vector<double> contraction_log;  ///< sup-grid distance between successive iterates
};

/// Field-level Picard iteration: u^(0) = h, and u^(n+1) solves the linear
/// backward equation whose coupling coefficients are frozen at u^(n). Stops
/// when the sup-grid distance drops below tol. Throws ConvergenceError with a
/// horizon-too-long diagnostic when the distances fail to decrease three times
/// in a row.
PicardResult picard_field(const ProblemSpec& spec, double eps, const TimeGrid& tgrid, const SpatialGrid& xgrid,
                          int max_iter, double tol);

/// Mean over paths of the sup over nodes of
///   |Y_m - (h(X_T) + sum_{r >= m} g dt - sum_{r >= m} Z dB_r)|,
/// with the increments dB regenerated from the ensemble's seed metadata.
double bsde_residual(const TrajectoryEnsemble& ens, const ProblemSpec& spec);

}  // namespace fblab
