#include "fblab/errors.hpp"
#include "fblab/limit.hpp"

#include <doctest.h>

#include <cmath>

using namespace fblab;

namespace {

ProblemSpec scalar_problem(const std::string& f, const std::string& g, const std::string& h, double T = 0.5,
                           double x0 = 1.0, double t0 = 0.0) {
    return ProblemSpec(1, 1, t0, T, Eigen::VectorXd::Constant(1, x0), {}, {{f}, {g}, {{"1"}}, {h}});
}

std::vector<Eigen::VectorXd> candidates(int n, double lo, double hi) {
    std::vector<Eigen::VectorXd> c;
    for (int i = 0; i < n; ++i) c.push_back(Eigen::VectorXd::Constant(1, lo + (hi - lo) * i / (n - 1)));
    return c;
}

// Simpson's rule on the RK4 nodes (even step counts), for integral-form defects.
double simpson(const std::vector<double>& v, double dt, int from, int to) {
    double s = 0.0;
    for (int m = from; m < to; m += 2) s += dt / 3.0 * (v[m] + 4.0 * v[m + 1] + v[m + 2]);
    return s;
}

}  // namespace

TEST_CASE("decoupled constants") {
    const ProblemSpec spec = scalar_problem("0", "0", "3*x1 + 1");
    const LimitSolution sol = shoot(spec, TimeGrid(0.0, 0.5, 20));
    CHECK(sol.u0[0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK((sol.X.values.array() - 1.0).abs().maxCoeff() == 0.0);
    CHECK((sol.Y.values.array() - 4.0).abs().maxCoeff() < 1e-14);
    CHECK(sol.X.values(0, 0) == 1.0);
}

TEST_CASE("Burgers characteristics closed form") {
    const ProblemSpec spec = scalar_problem("y1", "0", "0.5*x1");
    const LimitSolution sol = shoot(spec, TimeGrid(0.0, 0.5, 200));
    CHECK(std::abs(sol.u0[0] - 2.0 / 3.0) < 1e-10);
    CHECK(sol.residual <= 1e-12);
    CHECK_FALSE(sol.used_homotopy);

    // (a x0 + b) / (1 - a tau) with a = 1.5, b = -0.25, x0 = 0.3, tau = 0.4.
    const ProblemSpec other = scalar_problem("y1", "0", "1.5*x1 - 0.25", 0.9, 0.3, 0.5);
    CHECK(shoot(other, TimeGrid(0.5, 0.9, 64)).u0[0] == doctest::Approx((1.5 * 0.3 - 0.25) / (1.0 - 1.5 * 0.4)).epsilon(1e-10));
}

TEST_CASE("linear driver gives exp(-(T - t0))") {
    const ProblemSpec spec = scalar_problem("0", "-y1", "1");
    const LimitSolution sol = shoot(spec, TimeGrid(0.0, 0.5, 100));
    CHECK(std::abs(sol.u0[0] - std::exp(-0.5)) < 1e-10);
}

TEST_CASE("RK4 self-convergence is fourth order") {
    const ProblemSpec spec = scalar_problem("sin(y1) + 0.3*x1", "0.5*cos(x1) - 0.2*y1", "tanh(x1)", 0.8, 0.4);
    std::vector<double> u;
    for (int n : {8, 16, 32}) u.push_back(shoot(spec, TimeGrid(0.0, 0.8, n)).u0[0]);
    const double ratio = std::abs(u[0] - u[1]) / std::abs(u[1] - u[2]);
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("limit path satisfies the integral equations to O(dt^4)") {
    const ProblemSpec spec = scalar_problem("sin(y1) + 0.3*x1", "0.5*cos(x1) - 0.2*y1", "tanh(x1)", 0.8, 0.4);
    std::vector<double> defects;
    for (int n : {16, 32}) {
        const TimeGrid g(0.0, 0.8, n);
        const LimitSolution sol = shoot(spec, g);
        std::vector<double> f(n + 1), gv(n + 1);
        for (int m = 0; m <= n; ++m) {
            f[m] = spec.drift1(g.node(m), sol.X.values(m, 0), sol.Y.values(m, 0));
            gv[m] = spec.driver1(g.node(m), sol.X.values(m, 0), sol.Y.values(m, 0), 0.0);
        }
        double worst = 0.0;
        for (int m = 0; m <= n; m += 2) {
            const double dx = sol.X.values(m, 0) - 0.4 - simpson(f, g.dt(), 0, m);
            const double dy = sol.Y.values(m, 0) - spec.terminal1(sol.X.values(n, 0)) - simpson(gv, g.dt(), m, n);
            worst = std::max({worst, std::abs(dx), std::abs(dy)});
        }
        defects.push_back(worst);
    }
    CHECK(defects[1] < 1e-6);
    CHECK(defects[0] / defects[1] > 10.0);
}

TEST_CASE("inviscid field examples") {
    const TimeGrid tg(0.0, 0.5, 20);
    const SpatialGrid xg(-2.0, 2.0, 16);  // x = 1 is node 12 exactly
    SUBCASE("transport free") {
        const ProblemSpec spec = scalar_problem("0", "0", "sin(x1)");
        const DecouplingField f = inviscid_field(spec, tg, xg);
        for (int m = 0; m < tg.n_nodes(); ++m)
            for (int j = 0; j < xg.n_nodes(); ++j) CHECK(std::abs(f.u(m, j) - std::sin(xg.node(j))) < 1e-12);
        CHECK(f.epsilon == 0.0);
    }
    SUBCASE("Burgers linear data") {
        const ProblemSpec spec = scalar_problem("y1", "0", "0.5*x1");
        const DecouplingField f = inviscid_field(spec, tg, xg);
        for (int m = 0; m < tg.n_nodes(); ++m)
            for (int j = 0; j < xg.n_nodes(); ++j) {
                const double exact = 0.5 * xg.node(j) / (1.0 - 0.5 * (0.5 - tg.node(m)));
                CHECK(std::abs(f.u(m, j) - exact) < 1e-11);
            }
        // Same computation as shoot at the start point.
        CHECK(f.u(0, 12) == shoot(spec, tg).u0[0]);
        // Lipschitz in x: difference ratios stay bounded over the grid.
        const double ratio = f.du_dx.cwiseAbs().maxCoeff();
        CHECK(ratio < 1.0);
    }
}

TEST_CASE("shooting failures") {
    // a tau = 1: the mismatch c - a (x0 + c tau) does not depend on c.
    const ProblemSpec singular = scalar_problem("y1", "0", "2*x1");
    CHECK_THROWS_AS(shoot(singular, TimeGrid(0.0, 0.5, 50)), ConvergenceError);
    CHECK_THROWS_AS(shoot(scalar_problem("0", "0", "x1"), TimeGrid(0.0, 0.5, 50), {0.0, 50, 8}), Error);
    CHECK_THROWS_AS(shoot(scalar_problem("0", "0", "x1"), TimeGrid(0.0, 0.6, 50)), GridMismatch);

    const TimeGrid tg(0.0, 0.5, 20);
    try {
        inviscid_field(singular, tg, SpatialGrid(-1.0, 1.0, 4));
        FAIL("expected a shooting failure");
    } catch (const ConvergenceError& e) {
        CHECK(std::string(e.what()).find("node s =") != std::string::npos);
    }
}

TEST_CASE("homotopy rescues a stalled Newton start") {
    // Strongly nonlinear coupling: Newton from h(x0) overshoots into the
    // region where the residual grows, the horizon continuation does not.
    const ProblemSpec spec = scalar_problem("3*sin(2*y1)", "0", "4*tanh(3*x1)", 0.3, 0.05);
    const LimitSolution sol = shoot(spec, TimeGrid(0.0, 0.3, 60));
    CHECK(sol.residual <= 1e-12);
}

TEST_CASE("uniqueness probe") {
    const TimeGrid tg(0.0, 0.5, 100);
    SUBCASE("Burgers with a tau < 1 has one root") {
        const UniquenessProbe p = verify_uniqueness_probe(scalar_problem("y1", "0", "0.5*x1"), tg, candidates(50, -5, 5));
        REQUIRE(p.roots.size() == 1);
        CHECK(p.roots[0].root[0] == doctest::Approx(2.0 / 3.0));
        CHECK(p.roots[0].hits == 50);
    }
    SUBCASE("decoupled problem") {
        const UniquenessProbe p = verify_uniqueness_probe(scalar_problem("0", "0", "x1*x1"), tg, candidates(7, -1, 1));
        REQUIRE(p.roots.size() == 1);
        CHECK(p.roots[0].root[0] == doctest::Approx(1.0));
        CHECK(p.roots[0].inverse_jacobian_norm == doctest::Approx(1.0));
    }
    SUBCASE("near-singular a tau = 0.99") {
        const UniquenessProbe p = verify_uniqueness_probe(scalar_problem("y1", "0", "1.98*x1"), tg, candidates(50, -5, 5));
        REQUIRE(p.roots.size() == 1);
        CHECK(p.roots[0].inverse_jacobian_norm > 50.0);
    }
}
