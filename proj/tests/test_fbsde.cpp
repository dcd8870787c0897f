#include "fblab/errors.hpp"
#include "fblab/fbsde.hpp"
#include "fblab/limit.hpp"
#include "fblab/pde.hpp"

#include <doctest.h>

#include <cmath>

using namespace fblab;

namespace {

ProblemSpec scalar_problem(const std::string& f, const std::string& g, const std::string& h, double T = 0.5,
                           double x0 = 1.0) {
    return ProblemSpec(1, 1, 0.0, T, Eigen::VectorXd::Constant(1, x0), {}, {{f}, {g}, {{"1"}}, {h}});
}

const SpatialGrid kMesh(-6.0, 8.0, 280);

}  // namespace

TEST_CASE("heat affine ensemble: Y = X and Z = sqrt(eps)") {
    const ProblemSpec spec = scalar_problem("0", "0", "x1");
    const TimeGrid tg(0.0, 0.5, 100);
    const RandomSource src(12345);
    for (double eps : {0.2, 0.05}) {
        const DecouplingField field = solve_viscous(spec, eps, tg, kMesh);
        const TrajectoryEnsemble ens = simulate(spec, field, eps, 2000, src);
        CHECK(ens.exits == 0);
        CHECK((ens.Y - ens.X).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((ens.Z.array() - std::sqrt(eps)).abs().maxCoeff() <= 1e-12);
        CHECK(ens.X.col(0).isConstant(1.0));

        // Driftless martingale: E X_T = x0 within four standard errors.
        const double mean = ens.X.col(tg.n_steps()).mean();
        CHECK(std::abs(mean - 1.0) <= 4.0 * std::sqrt(eps * 0.5 / 2000));

        // Exact telescoping: the backward defect is round-off only.
        CHECK(bsde_residual(ens, spec) <= 1e-12);
    }
}

TEST_CASE("zero noise reproduces the limit path to O(dt)") {
    const ProblemSpec spec = scalar_problem("y1", "0", "0.5*x1");
    std::vector<double> errors;
    for (int n : {50, 100, 200}) {
        const TimeGrid tg(0.0, 0.5, n);
        const DecouplingField field = solve_viscous(spec, 0.0, tg, kMesh);
        const TrajectoryEnsemble ens = simulate(spec, field, 0.0, 3, RandomSource(1));
        const LimitSolution lim = shoot(spec, tg);
        CHECK(ens.X.row(0) == ens.X.row(2));
        errors.push_back((ens.X.row(0).transpose() - lim.X.values.col(0)).cwiseAbs().maxCoeff());
        CHECK(bsde_residual(ens, spec) < 0.05);
    }
    CHECK(errors[0] < 0.05);
    CHECK(errors[0] / errors[1] > 1.6);
    CHECK(errors[1] / errors[2] > 1.6);
}

TEST_CASE("bsde residual shrinks with the time step") {
    const ProblemSpec spec = scalar_problem("y1", "0", "0.5*x1");
    const RandomSource src(2024);
    std::vector<double> defect;
    for (int n : {50, 100, 200}) {
        const TimeGrid tg(0.0, 0.5, n);
        const DecouplingField field = solve_viscous(spec, 0.1, tg, kMesh);
        defect.push_back(bsde_residual(simulate(spec, field, 0.1, 2000, src), spec));
    }
    MESSAGE("defects " << defect[0] << " " << defect[1] << " " << defect[2]);
    CHECK(defect[0] / defect[1] > 1.5);
    CHECK(defect[1] / defect[2] > 1.5);
    CHECK(defect[0] / defect[1] < 2.6);
    CHECK(defect[1] / defect[2] < 2.6);
}

TEST_CASE("effective SDE coefficients") {
    const ProblemSpec spec = scalar_problem("y1", "0", "0.5*x1");
    const TimeGrid tg(0.0, 0.5, 50);
    const DecouplingField field = solve_viscous(spec, 0.1, tg, kMesh);
    const EffectiveSDE sde(spec, field);
    CHECK(sde.drift(0.5, 2.0) == doctest::Approx(1.0));
    CHECK(sde.diffusion(0.2, 1.0) == 1.0);
    CHECK(&sde.field() == &field);
}

TEST_CASE("simulate preconditions and exits") {
    const ProblemSpec spec = scalar_problem("0", "0", "x1");
    const TimeGrid tg(0.0, 0.5, 50);
    const DecouplingField field = solve_viscous(spec, 0.2, tg, kMesh);
    const RandomSource src(3);
    CHECK_THROWS_AS(simulate(spec, field, 0.1, 10, src), Error);
    CHECK_THROWS_AS(simulate(spec, field, 0.2, 0, src), Error);

    const SpatialGrid narrow(0.5, 1.5, 20);
    const DecouplingField tight = solve_viscous(spec, 0.2, tg, narrow);
    try {
        simulate(spec, tight, 0.2, 1000, src);
        FAIL("expected the exit limit to trigger");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numerical);
        CHECK(std::string(e.what()).find("left the mesh") != std::string::npos);
    }
}

TEST_CASE("streams make ensembles independent of size and offset") {
    const ProblemSpec spec = scalar_problem("y1", "0", "0.5*x1");
    const TimeGrid tg(0.0, 0.5, 50);
    const DecouplingField field = solve_viscous(spec, 0.1, tg, kMesh);
    const RandomSource src(77);
    const TrajectoryEnsemble all = simulate(spec, field, 0.1, 40, src);
    const TrajectoryEnsemble tail = simulate(spec, field, 0.1, 10, src, 30);
    CHECK(all.X.bottomRows(10) == tail.X);
    CHECK(tail.first_stream == 30);
    CHECK(bsde_residual(tail, spec) > 0.0);
}

TEST_CASE("Picard iteration") {
    const TimeGrid tg(0.0, 0.5, 100);
    SUBCASE("uncoupled data converge after one solve") {
        const PicardResult r = picard_field(scalar_problem("0", "0", "sin(x1)"), 0.1, tg, kMesh, 10, 1e-12);
        CHECK(r.iterations == 1);
        CHECK(r.contraction_log.back() == 0.0);
    }
    SUBCASE("Burgers matches the direct solver") {
        const ProblemSpec spec = scalar_problem("y1", "0", "0.5*x1");
        const PicardResult r = picard_field(spec, 0.05, tg, kMesh, 200, 1e-11);
        for (std::size_t i = 1; i < r.contraction_log.size(); ++i)
            CHECK(r.contraction_log[i] < r.contraction_log[i - 1]);
        const DecouplingField direct = solve_viscous(spec, 0.05, tg, kMesh);
        CHECK(interior_sup_distance(r.field, direct) <= 1e-4);
    }
    SUBCASE("a tau > 1 does not contract") {
        try {
            picard_field(scalar_problem("y1", "0", "3*x1"), 0.05, tg, kMesh, 200, 1e-11);
            FAIL("expected a non-contraction diagnostic");
        } catch (const ConvergenceError& e) {
            CHECK(std::string(e.what()).find("horizon") != std::string::npos);
        }
    }
    SUBCASE("bad arguments") {
        CHECK_THROWS_AS(picard_field(scalar_problem("0", "0", "x1"), 0.1, tg, kMesh, 0, 1e-8), Error);
    }
}
