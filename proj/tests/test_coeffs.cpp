#include "fblab/errors.hpp"
#include "fblab/expression.hpp"
#include "fblab/problem.hpp"
#include "fblab/validation.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fblab;

namespace {

ProblemSpec scalar_problem(const std::string& f, const std::string& g, const std::string& sigma, const std::string& h) {
    return ProblemSpec(1, 1, 0.0, 0.5, Eigen::VectorXd::Constant(1, 1.0), {0.1}, {{f}, {g}, {{sigma}}, {h}});
}

// Random expression text over the driver alphabet of a d = k = 1 problem.
std::string random_text(std::mt19937_64& rng, int depth) {
    static const char* leaves[] = {"t", "x1", "y1", "z11", "0.5", "2", "1e-3", "3.25"};
    static const char* unary[] = {"sin", "cos", "exp", "tanh", "abs", "sqrt"};
    static const char* binary_fn[] = {"min", "max"};
    static const char* ops[] = {" + ", " - ", " * ", " / "};
    std::uniform_int_distribution<int> pick(0, 9);
    const int k = depth <= 0 ? 0 : pick(rng);
    if (k <= 2) return leaves[rng() % 8];
    if (k <= 4) return std::string(unary[rng() % 6]) + "(" + random_text(rng, depth - 1) + ")";
    if (k == 5) return std::string(binary_fn[rng() % 2]) + "(" + random_text(rng, depth - 1) + ", " + random_text(rng, depth - 1) + ")";
    if (k == 6) return "-" + random_text(rng, depth - 1);
    return "(" + random_text(rng, depth - 1) + ops[rng() % 4] + random_text(rng, depth - 1) + ")";
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
    const Expression y = parse("y1", CoefficientKind::Drift);
    REQUIRE(y.nodes().size() == 1);
    CHECK(y.nodes()[0].op == Op::Var);
    CHECK(y.layout().name(y.nodes()[0].slot) == "y1");

    const Expression a = parse("0.5*x1 + 1", CoefficientKind::Terminal);
    CHECK(structurally_equal(a, parse("((0.5 * x1) + 1)", CoefficientKind::Terminal)));
    CHECK(a.nodes().back().op == Op::Add);
    CHECK(a.print() == "((0.5 * x1) + 1)");
}

TEST_CASE("parse rejects bad input with a position") {
    CHECK_THROWS_AS(parse("z1", CoefficientKind::Terminal), ParseError);
    CHECK_THROWS_AS(parse("y1", CoefficientKind::Terminal), ParseError);
    CHECK_THROWS_AS(parse("", CoefficientKind::Drift), ParseError);
    CHECK_THROWS_AS(parse("   ", CoefficientKind::Drift), ParseError);
    CHECK_THROWS_AS(parse("foo(x1)", CoefficientKind::Drift), ParseError);
    CHECK_THROWS_AS(parse("x1 +", CoefficientKind::Drift), ParseError);
    CHECK_THROWS_AS(parse("(x1", CoefficientKind::Drift), ParseError);
    CHECK_THROWS_AS(parse("z11", CoefficientKind::Drift), ParseError);
    CHECK_THROWS_AS(parse("x2", CoefficientKind::Drift), ParseError);
    try {
        parse("x1 + * 2", CoefficientKind::Drift);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 5);
        CHECK(e.kind() == ErrorKind::Input);
    }
}

TEST_CASE("driver accepts both z spellings") {
    const VariableLayout layout{2, 1};
    const Expression a = parse("z1_2 + z12", CoefficientKind::Driver, layout);
    const std::map<std::string, double> point{{"z12", 3.0}};
    CHECK(evaluate(a, point) == doctest::Approx(6.0));
}

TEST_CASE("evaluate examples") {
    CHECK(evaluate(parse("x1*y1", CoefficientKind::Drift), {{"x1", 2.0}, {"y1", 3.0}}) == 6.0);
    CHECK(evaluate(parse("exp(0)", CoefficientKind::Drift), {}) == 1.0);
    CHECK_THROWS_AS(evaluate(parse("1/ (x1 - x1)", CoefficientKind::Terminal), {{"x1", 1.0}}), DomainError);
    CHECK_THROWS_AS(evaluate(parse("sqrt(x1)", CoefficientKind::Terminal), {{"x1", -1.0}}), DomainError);
    CHECK_THROWS_AS(evaluate(parse("x1 + y1", CoefficientKind::Drift), {{"x1", 1.0}}), Error);
    CHECK(evaluate(parse("max(x1, 2) - min(-x1, 4)", CoefficientKind::Terminal), {{"x1", 1.0}}) == 3.0);
    CHECK(evaluate(parse("-2 * -x1", CoefficientKind::Terminal), {{"x1", 1.5}}) == 3.0);
    CHECK(evaluate(parse("2 - 3 - 4", CoefficientKind::Terminal), {}) == -5.0);
    CHECK(evaluate(parse("8 / 4 / 2", CoefficientKind::Terminal), {}) == 1.0);
}

TEST_CASE("print then parse is the identity on random trees") {
    std::mt19937_64 rng(7);
    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        const std::string text = random_text(rng, 5);
        const Expression e = parse(text, CoefficientKind::Driver);
        const Expression back = parse(e.print(), CoefficientKind::Driver);
        INFO(text);
        CHECK(structurally_equal(e, back));
        CHECK(back.print() == e.print());
        ++checked;
    }
    CHECK(checked == 500);
}

TEST_CASE("ProblemSpec enforces its invariants") {
    CHECK_NOTHROW(scalar_problem("y1", "0", "1", "x1"));
    CHECK_THROWS_AS(ProblemSpec(1, 1, 0.5, 0.5, Eigen::VectorXd::Zero(1), {}, {{"0"}, {"0"}, {{"1"}}, {"0"}}), Error);
    CHECK_THROWS_AS(ProblemSpec(1, 1, 0.0, 1.0, Eigen::VectorXd::Zero(1), {0.1, 0.2}, {{"0"}, {"0"}, {{"1"}}, {"0"}}),
                    Error);
    CHECK_THROWS_AS(ProblemSpec(1, 1, 0.0, 1.0, Eigen::VectorXd::Zero(1), {-0.1}, {{"0"}, {"0"}, {{"1"}}, {"0"}}), Error);
    CHECK_THROWS_AS(ProblemSpec(2, 1, 0.0, 1.0, Eigen::VectorXd::Zero(2), {}, {{"0"}, {"0"}, {{"1"}}, {"0"}}), Error);
    CHECK_THROWS_AS(ProblemSpec(1, 1, 0.0, 1.0, Eigen::VectorXd::Zero(2), {}, {{"0"}, {"0"}, {{"1"}}, {"0"}}), Error);
    CHECK_THROWS_AS(ProblemSpec(1, 1, 0.0, 1.0, Eigen::VectorXd::Zero(1), {}, {{"0"}, {"0"}, {{"1"}}, {"y1"}}),
                    ParseError);

    const ProblemSpec two(2, 1, 0.0, 1.0, Eigen::Vector2d(1.0, 2.0), {},
                          {{"x2", "y1"}, {"z11 + z12"}, {{"1", "0"}, {"0", "2"}}, {"x1 * x2"}});
    const Eigen::Vector2d x(3.0, 4.0);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 5.0);
    CHECK(two.drift(0.0, x, y) == Eigen::Vector2d(4.0, 5.0));
    Eigen::MatrixXd z(1, 2);
    z << 1.5, 2.5;
    CHECK(two.driver(0.0, x, y, z)[0] == 4.0);
    CHECK(two.diffusion(0.0, x, y)(1, 1) == 2.0);
    CHECK(two.terminal(x)[0] == 12.0);
}

TEST_CASE("validate reproduces the textbook constants") {
    SUBCASE("linear terminal data") {
        const ValidationReport r = validate(scalar_problem("0", "0", "1", "0.5*x1"));
        CHECK(r.lipschitz_by_coefficient.at("h") == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.probe_points == 10000);
        CHECK_FALSE(r.bounded_h);
    }
    SUBCASE("unit diffusion") {
        const ValidationReport r = validate(scalar_problem("0", "0", "1", "0"));
        REQUIRE(r.lambda_hat.has_value());
        CHECK(*r.lambda_hat == 1.0);
        CHECK(r.bounded_sigma);
        CHECK(r.violations.empty());
    }
    SUBCASE("Burgers drift") {
        const ValidationReport r = validate(scalar_problem("y1", "0", "1", "0"));
        CHECK(r.lipschitz_by_coefficient.at("f") <= 1.0);
        CHECK(r.lipschitz_by_coefficient.at("f") > 0.99);
        CHECK(r.growth_by_coefficient.at("f") <= 1.0);
    }
}

TEST_CASE("affine coefficients have exactly constant difference quotients") {
    // |3 (x - x')| / |x - x'| = 3 for every pair.
    const ValidationReport r = validate(scalar_problem("3*x1 - 1", "0", "1", "-2*x1 + 4"));
    CHECK(std::abs(r.lipschitz_by_coefficient.at("f") - 3.0) <= 1e-12 * 3.0);
    CHECK(std::abs(r.lipschitz_by_coefficient.at("h") - 2.0) <= 1e-12 * 2.0);
}

TEST_CASE("probed constants grow with the probe budget on a shared sample") {
    const ProblemSpec spec = scalar_problem("sin(3*x1) + y1*y1/10", "tanh(z11) + cos(y1)", "1 + 0.5*sin(x1)", "abs(x1)");
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        ProbeConfig small{200, 5.0, 1e6, seed};
        ProbeConfig big{2000, 5.0, 1e6, seed};
        const ValidationReport a = validate(spec, small), b = validate(spec, big);
        CHECK(b.L_hat >= a.L_hat);
        CHECK(b.Lambda_hat >= a.Lambda_hat);
        CHECK(*b.lambda_hat <= *a.lambda_hat);
    }
}

TEST_CASE("violations carry a concrete witness") {
    ProbeConfig cfg;
    cfg.lipschitz_cap = 5.0;
    const ValidationReport r = validate(scalar_problem("x1*x1", "0", "1", "0"), cfg);
    REQUIRE_FALSE(r.violations.empty());
    const Violation& v = r.violations.front();
    CHECK(v.assumption == "A.1");
    CHECK(v.coefficient == "f");
    CHECK(v.value > 5.0);
    bool has_prime = false;
    for (const auto& [name, value] : v.witness) has_prime = has_prime || name == "x1'";
    CHECK(has_prime);

    const ValidationReport degenerate = validate(scalar_problem("0", "0", "0", "0"));
    REQUIRE_FALSE(degenerate.violations.empty());
    CHECK(degenerate.violations.front().assumption == "B.2");
}

TEST_CASE("validate refuses tiny budgets but never throws on bad coefficients") {
    CHECK_THROWS_AS(validate(scalar_problem("0", "0", "1", "0"), {99, 5.0, 1e6, 0}), Error);
    const ValidationReport r = validate(scalar_problem("sqrt(x1)", "0", "1", "0"));
    bool domain = false;
    for (const auto& v : r.violations) domain = domain || v.assumption == "domain";
    CHECK(domain);
}
