#include "fblab/montecarlo.hpp"

#include "fblab/errors.hpp"
#include "fblab/parallel.hpp"

#include <cmath>
#include <limits>

namespace fblab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Sums in index order so the result is independent of the worker count.
MeanSe mean_and_se(const std::vector<double>& v) {
    const auto n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

double log_log_slope(const std::vector<double>& eps, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (y[i] > 0.0) {
            lx.push_back(std::log(eps[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 2) return kNaN;
    const auto n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

SweepReport convergence_sweep(const ProblemSpec& spec, const std::vector<DecouplingField>& fields,
                              const LimitSolution& limit, int n_paths, const RandomSource& src) {
    require_scalar_problem(spec, "convergence_sweep");
    SweepReport report;
    std::vector<double> eps_col, x_col, y_col, z_col;
    for (double eps : spec.epsilons()) {
        const DecouplingField* field = nullptr;
        for (const auto& f : fields)
            if (f.epsilon == eps) field = &f;
        if (!field) throw input_error("no decoupling field for eps = " + std::to_string(eps));
        if (!(field->tgrid == limit.grid)) throw GridMismatch("field and limit solution use different time grids");

        const TrajectoryEnsemble ens = simulate(spec, *field, eps, n_paths, src);
        const auto n = static_cast<std::size_t>(n_paths);
        std::vector<double> sx(n), sy(n), iz(n);
        const Eigen::RowVectorXd Xl = limit.X.values.col(0).transpose();
        const Eigen::RowVectorXd Yl = limit.Y.values.col(0).transpose();
        const double dt = limit.grid.dt();
        const int steps = limit.grid.n_steps();
        parallel_for(n, [&](std::size_t i) {
            const auto r = static_cast<Eigen::Index>(i);
            sx[i] = (ens.X.row(r) - Xl).cwiseAbs2().maxCoeff();
            sy[i] = (ens.Y.row(r) - Yl).cwiseAbs2().maxCoeff();
            iz[i] = ens.Z.row(r).head(steps).squaredNorm() * dt;
        });
        const MeanSe mx = mean_and_se(sx), my = mean_and_se(sy), mz = mean_and_se(iz);

        SweepRow row;
        row.eps = eps;
        row.n_paths = n_paths;
        row.mean_Y0 = ens.Y.col(0).mean();
        row.E_sup_X_diff_sq = mx.mean;
        row.E_sup_Y_diff_sq = my.mean;
        row.E_int_Z_sq = mz.mean;
        row.se_X = mx.se;
        row.se_Y = my.se;
        row.se_Z = mz.se;
        row.bsde_residual = bsde_residual(ens, spec);
        report.rows.push_back(row);
        eps_col.push_back(eps);
        x_col.push_back(mx.mean);
        y_col.push_back(my.mean);
        z_col.push_back(mz.mean);
    }
    report.slope_X = log_log_slope(eps_col, x_col);
    report.slope_Y = log_log_slope(eps_col, y_col);
    report.slope_Z = log_log_slope(eps_col, z_col);
    return report;
}

TubeEstimate wilson_interval(long successes, long n) {
    if (n < 1) throw input_error("Wilson interval needs n >= 1");
    TubeEstimate t;
    t.successes = successes;
    t.n_paths = n;
    const double N = static_cast<double>(n);
    t.p_hat = static_cast<double>(successes) / N;
    if (successes == 0) {
        // One-sided 95% upper bound.
        const double z = 1.6448536269514722;
        t.lower = 0.0;
        t.upper = z * z / (N + z * z);
        return t;
    }
    const double z = 1.959963984540054;
    const double z2 = z * z;
    const double centre = (t.p_hat + z2 / (2.0 * N)) / (1.0 + z2 / N);
    const double half = z / (1.0 + z2 / N) * std::sqrt(t.p_hat * (1.0 - t.p_hat) / N + z2 / (4.0 * N * N));
    t.lower = std::max(0.0, std::min(t.p_hat, centre - half));
    t.upper = std::min(1.0, std::max(t.p_hat, centre + half));
    return t;
}

TubeEstimate tube_probability(const ProblemSpec& spec, const DecouplingField& field, double eps, const Path& g,
                              double delta, long n_paths, const RandomSource& src) {
    require_scalar_problem(spec, "tube_probability");
    if (!(delta >= 0.0)) throw input_error("tube radius must be non-negative");
    if (n_paths < 1) throw input_error("tube_probability needs at least one path");
    if (field.epsilon != eps) throw input_error("field was solved for a different epsilon");
    if (!(g.grid == field.tgrid) || g.dim() != 1) throw GridMismatch("reference path is not on the simulation grid");

    const TimeGrid& grid = field.tgrid;
    const int n = grid.n_steps();
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const double root_eps = std::sqrt(eps);
    const double x0 = spec.x0()[0];

    std::vector<char> inside(static_cast<std::size_t>(n_paths), 0);
    parallel_for(inside.size(), [&](std::size_t i) {
        double x = x0;
        for (int m = 0; m <= n; ++m) {
            if (!(std::abs(x - g.values(m, 0)) < delta)) return;
            if (m == n) break;
            const double s = grid.node(m);
            const double y = field_at_node(field, m, x).value;
            const double dB = sqrt_dt * src.normal(i, static_cast<std::uint32_t>(m), 0);
            x += spec.drift1(s, x, y) * dt + root_eps * spec.diffusion1(s, x, y) * dB;
        }
        inside[i] = 1;
    });
    long successes = 0;
    for (char c : inside) successes += c;
    return wilson_interval(successes, n_paths);
}

ExponentFit exponent_fit(const RareEventReport& report) {
    std::vector<double> x, y;
    for (const auto& row : report.rows) {
        if (row.usable) {
            x.push_back(row.eps);
            y.push_back(row.neg_eps_log_p);
        }
    }
    ExponentFit fit;
    fit.usable_rows = static_cast<int>(x.size());
    if (x.size() < 3) throw input_error("exponent fit needs at least three usable rows, got " + std::to_string(x.size()));
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.extrapolated = my - fit.slope * mx;
    if (report.predicted == 0.0) {
        fit.zero_rate = true;
        fit.agreement_ratio = std::abs(fit.extrapolated) <= 1e-12 ? 1.0 : std::numeric_limits<double>::infinity();
    } else {
        fit.agreement_ratio = fit.extrapolated / report.predicted;
    }
    return fit;
}

}  // namespace fblab
