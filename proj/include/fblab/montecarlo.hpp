#pragma once

#include "fblab/fbsde.hpp"
#include "fblab/limit.hpp"

#include <vector>

namespace fblab {

struct SweepRow {
    double eps = 0.0;
    int n_paths = 0;
    double mean_Y0 = 0.0;
    double E_sup_X_diff_sq = 0.0;
    double E_sup_Y_diff_sq = 0.0;
    double E_int_Z_sq = 0.0;
    double se_X = 0.0;  ///< standard errors of the three means
    double se_Y = 0.0;
    double se_Z = 0.0;
    double bsde_residual = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;  ///< descending eps
    // Least-squares slopes of log(norm) against log(eps); NaN with fewer than two positive rows.
    double slope_X = 0.0;
    double slope_Y = 0.0;
    double slope_Z = 0.0;
};

/// For every eps of the problem, simulates an ensemble on streams 0..n_paths-1
/// (common random numbers across eps) and measures the distance to the limit:
/// E sup|X^eps - X|^2, E sup|Y^eps - Y|^2 and E int |Z^eps|^2.
SweepReport convergence_sweep(const ProblemSpec& spec, const std::vector<DecouplingField>& fields,
                              const LimitSolution& limit, int n_paths, const RandomSource& src);

struct TubeEstimate {
    double p_hat = 0.0;
    double lower = 0.0;  ///< Wilson 95% interval; one-sided upper bound when no path succeeds
    double upper = 0.0;
    long successes = 0;
    long n_paths = 0;
};

/// Wilson score interval for `successes` out of `n`.
TubeEstimate wilson_interval(long successes, long n);

/// Fraction of Euler-Maruyama paths with max_m |X_m - g_m| < delta. Paths are
/// streamed and stop at their first exit from the tube.
TubeEstimate tube_probability(const ProblemSpec& spec, const DecouplingField& field, double eps, const Path& g,
                              double delta, long n_paths, const RandomSource& src);

struct RareEventRow {
    double eps = 0.0;
    TubeEstimate estimate;
    double neg_eps_log_p = 0.0;  ///< -eps log p_hat; NaN when p_hat = 0
    bool usable = false;
};

struct RareEventReport {
    std::vector<RareEventRow> rows;  ///< descending eps
    double predicted = 0.0;          ///< I(g)
    double delta = 0.0;
};

struct ExponentFit {
    double slope = 0.0;                  ///< d(-eps log p)/d eps of the linear fit
    double extrapolated = 0.0;           ///< intercept at eps -> 0
    double agreement_ratio = 0.0;        ///< extrapolated / predicted
    bool zero_rate = false;              ///< predicted rate is zero; ratio is 1 when the fit is also zero
    int usable_rows = 0;
};

/// Linear least squares of -eps log p_hat against eps over usable rows,
/// extrapolated to eps = 0. Needs at least three usable rows.
ExponentFit exponent_fit(const RareEventReport& report);

}  // namespace fblab
