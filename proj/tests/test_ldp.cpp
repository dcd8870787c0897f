#include "fblab/errors.hpp"
#include "fblab/ldp.hpp"
#include "fblab/limit.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace fblab;

namespace {

// Brownian case on [0, 1]: g' = phi'.
ControlledODE schilder(int n_steps = 100) {
    ControlledODE ode{TimeGrid(0.0, 1.0, n_steps), SmallVec::Zero(1), {}, {}, SpatialGrid(-4.0, 5.0, 180)};
    ode.drift = [](double, const SmallVec& x) { return SmallVec::Zero(x.size()); };
    ode.dispersion = [](double, const SmallVec&) { return SmallMat::Identity(1, 1); };
    return ode;
}

SmallVec vec1(double v) { return SmallVec::Constant(1, v); }

Path from_function(const TimeGrid& g, double (*fn)(double)) {
    Path p(g, 1);
    for (int m = 0; m < g.n_nodes(); ++m) p.values(m, 0) = fn(g.node(m));
    return p;
}

ProblemSpec burgers() {
    return ProblemSpec(1, 1, 0.0, 0.5, Eigen::VectorXd::Constant(1, 1.0), {0.1}, {{"y1"}, {"0"}, {{"1"}}, {"0.5*x1"}});
}

}  // namespace

TEST_CASE("action of hand-made paths") {
    const ControlledODE ode = schilder();
    CHECK(action_of_path(from_function(ode.grid, [](double s) { return s; }), ode) == doctest::Approx(0.5).epsilon(1e-12));
    // Speed 2 on [0, 1/2], then at rest: 1/2 * 4 * 1/2 = 1.
    const Path kinked = from_function(ode.grid, [](double s) { return s < 0.5 ? 2.0 * s : 1.0; });
    CHECK(action_of_path(kinked, ode) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(action_of_path(from_function(ode.grid, [](double) { return 0.0; }), ode) == 0.0);
    CHECK(predict_tube_exponent(from_function(ode.grid, [](double s) { return s; }), ode) ==
          doctest::Approx(0.5).epsilon(1e-12));

    const Eigen::MatrixXd control = recover_control(kinked, ode);
    CHECK(control.rows() == ode.grid.n_steps());
    CHECK(control(0, 0) == doctest::Approx(2.0));
    CHECK(control(ode.grid.n_steps() - 1, 0) == doctest::Approx(0.0));
}

TEST_CASE("action preconditions") {
    ControlledODE ode = schilder();
    CHECK_THROWS_AS(action_of_path(Path(TimeGrid(0.0, 1.0, 50), 1), ode), GridMismatch);
    CHECK_THROWS_AS(action_of_path(from_function(ode.grid, [](double s) { return 1.0 + s; }), ode), Error);
    ode.dispersion = [](double, const SmallVec&) { return SmallMat::Zero(1, 1); };
    try {
        action_of_path(from_function(ode.grid, [](double s) { return s; }), ode);
        FAIL("expected a singular sigma error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numerical);
    }
}

TEST_CASE("reparametrisation costs action") {
    const ControlledODE ode = schilder();
    const double straight = action_of_path(from_function(ode.grid, [](double s) { return s; }), ode);
    for (double a : {0.3, 1.0, 2.5}) {
        Path p(ode.grid, 1);
        for (int m = 0; m < ode.grid.n_nodes(); ++m) {
            const double s = ode.grid.node(m);
            p.values(m, 0) = s + a * s * (1.0 - s);  // same endpoints, non-constant speed
        }
        CHECK(action_of_path(p, ode) > straight);
    }
}

TEST_CASE("minimised Brownian action") {
    const ControlledODE ode = schilder();
    SUBCASE("quadratic scaling in the offset") {
        for (double delta : {0.5, 1.0, 2.0}) {
            const ActionResult r = minimize_action(ode, vec1(delta), 1e-4);
            const double exact = delta * delta / 2.0;
            CHECK(std::abs(r.value - exact) / exact < 0.02);
            CHECK(r.converged);
            CHECK(r.constraint_violation <= 1e-4);
            CHECK(r.path.values(0, 0) == 0.0);
        }
    }
    SUBCASE("the minimiser is the straight line") {
        const ActionResult r = minimize_action(ode, vec1(1.0), 1e-4);
        double deviation = 0.0;
        for (int m = 0; m < ode.grid.n_nodes(); ++m)
            deviation = std::max(deviation, std::abs(r.path.values(m, 0) - ode.grid.node(m)));
        CHECK(deviation <= 1e-2);
        CHECK(r.value == doctest::Approx(action_of_path(r.path, ode)).epsilon(1e-9));
    }
    SUBCASE("the zero-cost endpoint") {
        const ActionResult r = minimize_action(ode, vec1(0.0), 1e-4);
        CHECK(r.value <= 1e-12);
        CHECK(r.control.values.cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("terminals outside the working region are rejected") {
        CHECK_THROWS_AS(minimize_action(ode, vec1(4.5), 1e-4), Error);
    }
}

TEST_CASE("paths away from the limit have positive action") {
    const ControlledODE ode = schilder();
    for (double bump : {0.2, 0.5}) {
        Path p(ode.grid, 1);
        for (int m = 0; m < ode.grid.n_nodes(); ++m) p.values(m, 0) = bump * std::sin(M_PI * ode.grid.node(m));
        CHECK(action_of_path(p, ode) > 0.0);
    }
}

TEST_CASE("coupled problem through the inviscid field") {
    const ProblemSpec spec = burgers();
    const TimeGrid tg(0.0, 0.5, 100);
    const DecouplingField inviscid = inviscid_field(spec, tg, SpatialGrid(-6.0, 8.0, 280));
    const ControlledODE ode = ControlledODE::from_field(spec, inviscid);
    const LimitSolution lim = shoot(spec, tg);

    // The RK4 limit path is not an exact Euler path of the interpolated
    // field, so its action is a small quadrature defect rather than zero.
    CHECK(action_of_path(lim.X, ode) <= 1e-6);

    const double x_T = lim.X.values(tg.n_steps(), 0);
    const double u_T_limit = spec.terminal1(x_T);
    SUBCASE("zero rate at the image of the limit") {
        const ActionResult j = rate_for_Y(u_T_limit, ode, inviscid, 1e-4);
        CHECK(j.value <= 1e-6);
    }
    SUBCASE("monotone terminal map: J equals I at the preimage") {
        const double psi = 1.0;  // h(x) = x / 2, preimage 2
        const ActionResult j = rate_for_Y(psi, ode, inviscid, 1e-4);
        const ActionResult i = minimize_action(ode, vec1(2.0), 1e-4);
        CHECK(std::abs(j.value - i.value) <= 0.05 * i.value);
        CHECK(j.value == doctest::Approx(1.0 / 3.0).epsilon(0.02));
    }
    SUBCASE("contraction inequality against witness paths") {
        for (double shift : {-0.4, 0.3, 0.8}) {
            Path g = lim.X;
            for (int m = 0; m < tg.n_nodes(); ++m) g.values(m, 0) += shift * (tg.node(m) / 0.5);
            const double I = action_of_path(g, ode);
            const ActionResult j = rate_for_Y(spec.terminal1(g.values(tg.n_steps(), 0)), ode, inviscid, 1e-4);
            CHECK(j.value <= I + 1e-4);
        }
    }
    SUBCASE("infeasible level") {
        const ActionResult j = rate_for_Y(100.0, ode, inviscid, 1e-4);
        CHECK(j.value == std::numeric_limits<double>::infinity());
        CHECK_FALSE(j.converged);
    }
}
