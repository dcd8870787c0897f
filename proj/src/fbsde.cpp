#include "fblab/fbsde.hpp"

#include "fblab/errors.hpp"
#include "fblab/parallel.hpp"
#include "fblab/pde.hpp"

#include <cmath>
#include <sstream>

namespace fblab {

EffectiveSDE::EffectiveSDE(const ProblemSpec& spec, const DecouplingField& field) : spec_(&spec), field_(&field) {
    require_scalar_problem(spec, "EffectiveSDE");
}

double EffectiveSDE::drift(double s, double x) const {
    return spec_->drift1(s, x, field_at(*field_, s, x).value);
}

double EffectiveSDE::diffusion(double s, double x) const {
    return spec_->diffusion1(s, x, field_at(*field_, s, x).value);
}

TrajectoryEnsemble simulate(const ProblemSpec& spec, const DecouplingField& field, double eps, int n_paths,
                            const RandomSource& src, std::uint64_t first_stream) {
    require_scalar_problem(spec, "simulate");
    if (n_paths < 1) throw input_error("simulate needs at least one path");
    if (field.epsilon != eps) throw input_error("field was solved for a different epsilon");

    const TimeGrid& grid = field.tgrid;
    const SpatialGrid& xg = field.xgrid;
    const int n = grid.n_steps();
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const double root_eps = std::sqrt(eps);
    const double x0 = spec.x0()[0];

    TrajectoryEnsemble ens;
    ens.epsilon = eps;
    ens.grid = grid;
    ens.master_seed = src.master_seed();
    ens.first_stream = first_stream;
    ens.X.resize(n_paths, n + 1);
    ens.Y.resize(n_paths, n + 1);
    ens.Z.resize(n_paths, n + 1);

    std::vector<char> exited(static_cast<std::size_t>(n_paths), 0);
    std::vector<int> clamps(static_cast<std::size_t>(n_paths), 0);

    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        const std::uint64_t stream = first_stream + i;
        double x = x0;
        for (int m = 0; m <= n; ++m) {
            const double s = grid.node(m);
            const ScalarSample at = field_at_node(field, m, x);
            if (at.clamped) {
                exited[i] = 1;
                ++clamps[i];
            }
            const double sigma = spec.diffusion1(s, x, at.value);
            ens.X(row, m) = x;
            ens.Y(row, m) = at.value;
            ens.Z(row, m) = root_eps * at.gradient * sigma;
            if (m == n) break;
            const double dB = eps > 0.0 ? sqrt_dt * src.normal(stream, static_cast<std::uint32_t>(m), 0) : 0.0;
            x += spec.drift1(s, x, at.value) * dt + root_eps * sigma * dB;
        }
    });

    for (std::size_t i = 0; i < exited.size(); ++i) {
        ens.exits += exited[i];
        ens.clamps += clamps[i];
    }
    if (ens.exits * 1000 > n_paths) {
        std::ostringstream msg;
        msg << ens.exits << " of " << n_paths << " paths left the mesh [" << xg.x_min() << ", " << xg.x_max()
            << "] (limit 0.1%)";
        throw numerical_error(msg.str());
    }
    return ens;
}

PicardResult picard_field(const ProblemSpec& spec, double eps, const TimeGrid& tgrid, const SpatialGrid& xgrid,
                          int max_iter, double tol) {
    require_scalar_problem(spec, "picard_field");
    if (max_iter < 1) throw input_error("picard_field needs max_iter >= 1");
    if (!(tol > 0.0)) throw input_error("picard_field needs tol > 0");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw input_error("epsilon must be finite and non-negative");

    const int n = tgrid.n_steps();
    const int n_x = xgrid.n_nodes();

    // u^(0)(s, x) = h(x) on every slice.
    DecouplingField current(eps, tgrid, xgrid);
    for (int j = 0; j < n_x; ++j) current.u.col(j).setConstant(spec.terminal1(xgrid.node(j)));
    for (int m = 0; m <= n; ++m) central_gradient(xgrid, current.u.row(m), current.du_dx.row(m));

    auto too_long = [&](const std::string& why) {
        std::ostringstream msg;
        msg << "Picard iteration does not contract (" << why << "); the horizon T - t0 = " << tgrid.T() - tgrid.t0()
            << " is likely too long for the small-time regime";
        return ConvergenceError(msg.str());
    };

    PicardResult result{current, 0, {}};
    int non_decreasing = 0;
    for (int it = 0; it < max_iter; ++it) {
        DecouplingField next(eps, tgrid, xgrid);
        next.u.row(n) = current.u.row(n);
        next.du_dx.row(n) = current.du_dx.row(n);
        try {
            for (int m = n - 1; m >= 0; --m) {
                const FrozenSlice c = freeze_coefficients(spec, eps, tgrid.node(m + 1), xgrid, current.u.row(m + 1),
                                                          current.du_dx.row(m + 1));
                next.u.row(m) = backward_step(xgrid, tgrid.dt(), eps, c, next.u.row(m + 1));
                if (!next.u.row(m).allFinite())
                    throw DivergenceError("non-finite slice at time node " + std::to_string(m), m);
                central_gradient(xgrid, next.u.row(m), next.du_dx.row(m));
            }
        } catch (const CflViolation& e) {
            throw too_long(std::string("inner solve: ") + e.what());
        } catch (const DivergenceError& e) {
            throw too_long(std::string("inner solve: ") + e.what());
        } catch (const DomainError& e) {
            throw too_long(std::string("inner solve: ") + e.what());
        }

        const double dist = (next.u - current.u).cwiseAbs().maxCoeff();
        if (!result.contraction_log.empty() && !(dist < result.contraction_log.back())) {
            if (++non_decreasing >= 3) throw too_long("distance failed to decrease three times in a row");
        } else {
            non_decreasing = 0;
        }
        result.contraction_log.push_back(dist);
        current = std::move(next);
        if (dist < tol) {
            result.field = std::move(current);
            result.iterations = std::max(1, it);
            return result;
        }
    }
    std::ostringstream msg;
    msg << "Picard iteration reached max_iter = " << max_iter << " with distance " << result.contraction_log.back()
        << " >= tol " << tol;
    throw ConvergenceError(msg.str());
}

double bsde_residual(const TrajectoryEnsemble& ens, const ProblemSpec& spec) {
    require_scalar_problem(spec, "bsde_residual");
    if (ens.n_paths() < 1) throw input_error("bsde_residual needs a nonempty ensemble");
    const TimeGrid& grid = ens.grid;
    const int n = grid.n_steps();
    const double dt = grid.dt();
    const RandomSource src(ens.master_seed);

    std::vector<double> defect(static_cast<std::size_t>(ens.n_paths()));
    parallel_for(defect.size(), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        const Eigen::MatrixXd dB = ens.epsilon > 0.0
                                       ? brownian_increments(src, ens.first_stream + i, grid, 1)
                                       : Eigen::MatrixXd::Zero(n, 1);
        // Backward accumulation: target_m = h(X_T) + sum_{r >= m} (g dt - Z dB).
        double target = spec.terminal1(ens.X(row, n));
        double worst = std::abs(ens.Y(row, n) - target);
        for (int m = n - 1; m >= 0; --m) {
            const double g = spec.driver1(grid.node(m), ens.X(row, m), ens.Y(row, m), ens.Z(row, m));
            target += g * dt - ens.Z(row, m) * dB(m, 0);
            worst = std::max(worst, std::abs(ens.Y(row, m) - target));
        }
        defect[i] = worst;
    });
    double sum = 0.0;
    for (double v : defect) sum += v;
    return sum / static_cast<double>(defect.size());
}

}  // namespace fblab
