#include "fblab/errors.hpp"
#include "fblab/montecarlo.hpp"
#include "fblab/parallel.hpp"
#include "fblab/pde.hpp"

#include <doctest.h>

#include <cmath>

using namespace fblab;

namespace {

ProblemSpec scalar_problem(const std::string& f, const std::string& h, std::vector<double> eps, double T = 0.5,
                           double x0 = 1.0) {
    return ProblemSpec(1, 1, 0.0, T, Eigen::VectorXd::Constant(1, x0), std::move(eps), {{f}, {"0"}, {{"1"}}, {h}});
}

const SpatialGrid kMesh(-6.0, 8.0, 280);
const TimeGrid kTime(0.0, 0.5, 100);

struct Setup {
    ProblemSpec spec;
    std::vector<DecouplingField> fields;
    LimitSolution limit;
};

Setup prepare(const ProblemSpec& spec) {
    std::vector<DecouplingField> fields;
    for (double eps : spec.epsilons()) fields.push_back(solve_viscous(spec, eps, kTime, kMesh));
    return {spec, std::move(fields), shoot(spec, kTime)};
}

RareEventRow row(double eps, double p) {
    RareEventRow r;
    r.eps = eps;
    r.estimate.p_hat = p;
    r.usable = p > 0.0;
    r.neg_eps_log_p = p > 0.0 ? -eps * std::log(p) : std::nan("");
    return r;
}

}  // namespace

TEST_CASE("Wilson interval") {
    for (long n : {10L, 1000L, 1000000L}) {
        for (long s : {0L, 1L, n / 3, n - 1, n}) {
            const TubeEstimate t = wilson_interval(s, n);
            CHECK(t.p_hat >= 0.0);
            CHECK(t.p_hat <= 1.0);
            CHECK(t.lower <= t.p_hat);
            CHECK(t.upper >= t.p_hat);
            CHECK(t.lower >= 0.0);
            CHECK(t.upper <= 1.0);
        }
    }
    const TubeEstimate none = wilson_interval(0, 1000);
    CHECK(none.upper == doctest::Approx(1.6448536269514722 * 1.6448536269514722 / (1000 + 2.705543454095404)));
    // Textbook value: 30 of 100 gives [0.2189, 0.3958].
    const TubeEstimate t = wilson_interval(30, 100);
    CHECK(t.lower == doctest::Approx(0.2189).epsilon(1e-3));
    CHECK(t.upper == doctest::Approx(0.3958).epsilon(1e-3));
    CHECK_THROWS_AS(wilson_interval(0, 0), Error);
}

TEST_CASE("heat affine sweep has slope one in every norm") {
    const Setup s = prepare(scalar_problem("0", "x1", {0.2, 0.1, 0.05, 0.025}));
    const SweepReport r = convergence_sweep(s.spec, s.fields, s.limit, 4000, RandomSource(5));
    CHECK(r.slope_X == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.slope_Y == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.slope_Z == doctest::Approx(1.0).epsilon(1e-9));
    for (const SweepRow& row : r.rows) {
        // E int |Z|^2 = eps (T - t0) on the left-endpoint rule.
        CHECK(row.E_int_Z_sq == doctest::Approx(row.eps * 0.5).epsilon(1e-12));
        CHECK(row.bsde_residual <= 1e-12);
    }
}

TEST_CASE("Burgers sweep") {
    const Setup s = prepare(scalar_problem("y1", "0.5*x1", {0.2, 0.1, 0.05, 0.025, 0.0125}));
    const SweepReport r = convergence_sweep(s.spec, s.fields, s.limit, 10000, RandomSource(12345));
    REQUIRE(r.rows.size() == 5);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const SweepRow& row = r.rows[i];
        CHECK(row.E_sup_X_diff_sq >= 0.0);
        CHECK(row.E_sup_Y_diff_sq >= 0.0);
        CHECK(row.E_int_Z_sq >= 0.0);
        if (i > 0) {
            CHECK(row.eps < r.rows[i - 1].eps);
            CHECK(row.E_sup_X_diff_sq <= r.rows[i - 1].E_sup_X_diff_sq + 2.0 * row.se_X);
        }
    }
    for (double slope : {r.slope_X, r.slope_Y, r.slope_Z}) {
        CHECK(slope >= 0.7);
        CHECK(slope <= 1.3);
    }
    // The three norms vanish together.
    const SweepRow& first = r.rows.front();
    const SweepRow& last = r.rows.back();
    CHECK(last.E_sup_X_diff_sq < 0.1 * first.E_sup_X_diff_sq);
    CHECK(last.E_sup_Y_diff_sq < 0.1 * first.E_sup_Y_diff_sq);
    CHECK(last.E_int_Z_sq < 0.1 * first.E_int_Z_sq);
}

TEST_CASE("standard errors halve with four times the paths") {
    const Setup s = prepare(scalar_problem("y1", "0.5*x1", {0.1}));
    const SweepReport a = convergence_sweep(s.spec, s.fields, s.limit, 2500, RandomSource(9));
    const SweepReport b = convergence_sweep(s.spec, s.fields, s.limit, 10000, RandomSource(9));
    const double rx = a.rows[0].se_X / b.rows[0].se_X;
    const double ry = a.rows[0].se_Y / b.rows[0].se_Y;
    CHECK(std::abs(rx - 2.0) <= 0.4);
    CHECK(std::abs(ry - 2.0) <= 0.4);
}

TEST_CASE("reports do not depend on the worker count") {
    const Setup s = prepare(scalar_problem("y1", "0.5*x1", {0.2, 0.1}));
    const int saved = worker_count();
    set_worker_count(1);
    const SweepReport a = convergence_sweep(s.spec, s.fields, s.limit, 3000, RandomSource(4));
    const TubeEstimate ta = tube_probability(s.spec, s.fields[1], 0.1, s.limit.X, 0.3, 20000, RandomSource(4));
    set_worker_count(4);
    const SweepReport b = convergence_sweep(s.spec, s.fields, s.limit, 3000, RandomSource(4));
    const TubeEstimate tb = tube_probability(s.spec, s.fields[1], 0.1, s.limit.X, 0.3, 20000, RandomSource(4));
    set_worker_count(saved);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].E_sup_X_diff_sq == b.rows[i].E_sup_X_diff_sq);
        CHECK(a.rows[i].E_sup_Y_diff_sq == b.rows[i].E_sup_Y_diff_sq);
        CHECK(a.rows[i].E_int_Z_sq == b.rows[i].E_int_Z_sq);
        CHECK(a.rows[i].se_X == b.rows[i].se_X);
        CHECK(a.rows[i].bsde_residual == b.rows[i].bsde_residual);
    }
    CHECK(a.slope_X == b.slope_X);
    CHECK(ta.successes == tb.successes);
}

TEST_CASE("tube probability edge cases") {
    const Setup s = prepare(scalar_problem("y1", "0.5*x1", {0.1}));
    const RandomSource src(8);
    const TubeEstimate wide = tube_probability(s.spec, s.fields[0], 0.1, s.limit.X, 10.0, 5000, src);
    CHECK(wide.p_hat == 1.0);
    const TubeEstimate empty = tube_probability(s.spec, s.fields[0], 0.1, s.limit.X, 0.0, 5000, src);
    CHECK(empty.p_hat == 0.0);
    CHECK(empty.upper > 0.0);
    const TubeEstimate mid = tube_probability(s.spec, s.fields[0], 0.1, s.limit.X, 0.3, 5000, src);
    CHECK(mid.p_hat > 0.0);
    CHECK(mid.p_hat < 1.0);
    CHECK(mid.lower <= mid.p_hat);
    CHECK(mid.upper >= mid.p_hat);
    CHECK_THROWS_AS(tube_probability(s.spec, s.fields[0], 0.1, Path(TimeGrid(0.0, 0.5, 10), 1), 0.3, 10, src),
                    GridMismatch);
}

TEST_CASE("exponent fit") {
    SUBCASE("exact linear data") {
        RareEventReport r;
        r.predicted = 0.5;
        for (double eps : {0.2, 0.1, 0.05}) r.rows.push_back(row(eps, std::exp(-(0.5 + 2.0 * eps) / eps)));
        const ExponentFit fit = exponent_fit(r);
        CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(fit.extrapolated == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(fit.agreement_ratio == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(fit.usable_rows == 3);
    }
    SUBCASE("certain events are a zero-rate agreement") {
        RareEventReport r;
        r.predicted = 0.0;
        for (double eps : {0.2, 0.1, 0.05}) r.rows.push_back(row(eps, 1.0));
        const ExponentFit fit = exponent_fit(r);
        CHECK(fit.slope == 0.0);
        CHECK(fit.extrapolated == 0.0);
        CHECK(fit.zero_rate);
        CHECK(fit.agreement_ratio == 1.0);
    }
    SUBCASE("no successes is an error") {
        RareEventReport r;
        r.predicted = 0.5;
        for (double eps : {0.2, 0.1, 0.05}) r.rows.push_back(row(eps, 0.0));
        CHECK_THROWS_AS(exponent_fit(r), Error);
    }
}
