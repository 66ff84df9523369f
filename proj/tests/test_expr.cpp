#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pss/expr.hpp"

using namespace pss::expr;
using Catch::Approx;

namespace {

JetPoint point(std::vector<double> z, double x = 0, double t = 0, double eta = 0,
               double beta = 0) {
    JetPoint p;
    p.z = std::move(z);
    p.x = x;
    p.t = t;
    p.eta = eta;
    p.beta = beta;
    return p;
}

// random polynomial over {x, z0, z1, z2}: sums/products/powers with small
// integer exponents, bounded depth
Expression random_polynomial(std::mt19937& rng, int depth = 3) {
    std::uniform_int_distribution<int> kind(0, depth <= 0 ? 1 : 4);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    std::uniform_int_distribution<int> var(0, 3);
    switch (kind(rng)) {
        case 0: return Expression::number(coeff(rng));
        case 1: {
            const int v = var(rng);
            return v == 0 ? Expression::symbol("x") : Expression::jet(v - 1);
        }
        case 2: return random_polynomial(rng, depth - 1) + random_polynomial(rng, depth - 1);
        case 3: return random_polynomial(rng, depth - 1) * random_polynomial(rng, depth - 1);
        default: {
            std::uniform_int_distribution<int> ex(2, 3);
            return pow(random_polynomial(rng, depth - 1), Expression::number(ex(rng)));
        }
    }
}

}  // namespace

TEST_CASE("parse resolves jet variables and aliases") {
    auto e = parse("z1^2 + sin(u)", 2);
    const auto syms = e.symbols();
    REQUIRE(syms == std::set<std::string>{"z0", "z1"});

    auto lin = parse("eta*x + beta*t", 0);
    REQUIRE(lin.evaluate(point({}, 1.0, 1.0, 2.0, 3.0)) == Approx(5.0));

    REQUIRE_THROWS_AS(parse("z3", 2), ParseError);
    REQUIRE_THROWS_AS(parse("nope + 1", 2), ParseError);
    REQUIRE_THROWS_AS(parse("frob(z0)", 2), ParseError);
    REQUIRE_THROWS_AS(parse("(z0 + 1", 2), ParseError);
    REQUIRE_THROWS_AS(parse("z0 z1", 2), ParseError);

    // declared constants resolve; undeclared ones do not
    REQUIRE(parse("a*z0", 1, {"a"}).symbols() == std::set<std::string>{"a", "z0"});
}

TEST_CASE("parse error carries position") {
    try {
        parse("z0 +\n qq", 2);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(e.line == 2);
        REQUIRE(e.column == 2);
    }
}

TEST_CASE("precedence: ^ binds tighter than unary minus, right-assoc") {
    REQUIRE(parse("-x^2", 0).evaluate(point({}, 3.0)) == Approx(-9.0));
    REQUIRE(parse("(-x)^2", 0).evaluate(point({}, 3.0)) == Approx(9.0));
    REQUIRE(parse("2^3^2", 0).evaluate(point({})) == Approx(512.0));
    REQUIRE(parse("2^-1", 0).evaluate(point({})) == Approx(0.5));
    REQUIRE(parse("6/3/2", 0).evaluate(point({})) == Approx(1.0));
    REQUIRE(parse("1 - 2 - 3", 0).evaluate(point({})) == Approx(-4.0));
    REQUIRE(parse("1e-3 + 2.5e2", 0).evaluate(point({})) == Approx(250.001));
}

TEST_CASE("general exponent rewrites through exp/log") {
    auto e = parse("x^t", 0);
    REQUIRE(e.evaluate(point({}, 2.0, 3.5)) == Approx(std::pow(2.0, 3.5)));
    // negative base is a domain error through the log rewrite
    REQUIRE_THROWS_AS(e.evaluate(point({}, -2.0, 3.5)), EvalError);
}

TEST_CASE("evaluate basics and domain errors") {
    REQUIRE(parse("z0*z1", 1).evaluate(point({2, 3})) == Approx(6.0));
    REQUIRE(parse("sin(z0)", 0).evaluate(point({0})) == 0.0);
    REQUIRE_THROWS_AS(parse("sqrt(z0)", 0).evaluate(point({-1})), EvalError);
    REQUIRE_THROWS_AS(parse("log(z0)", 0).evaluate(point({0})), EvalError);
    REQUIRE_THROWS_AS(parse("1/z0", 0).evaluate(point({0})), EvalError);
    try {
        parse("1 + 1/(z0 - 1)", 0).evaluate(point({1}));
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        REQUIRE(e.subexpression.find("z0 - 1") != std::string::npos);
    }
    // unassigned jet variable
    REQUIRE_THROWS_AS(parse("z2", 2).evaluate(point({1, 2})), EvalError);
}

TEST_CASE("differentiate: exact partials with zero collapse") {
    REQUIRE(parse("z0^2", 0).diff("z0").str() == "2*z0");
    REQUIRE(parse("sin(z0)", 1).diff("z1").is_literal_zero());
    REQUIRE(parse("eta*z1 - beta*z0", 1).diff("z1").str() == "eta");

    // identically-zero derivatives collapse to the literal 0 whenever the
    // variable does not occur
    std::mt19937 rng(7);
    for (int i = 0; i < 50; ++i) {
        auto e = random_polynomial(rng);
        if (!e.depends_on("z3")) REQUIRE(e.diff("z3").is_literal_zero());
    }
}

TEST_CASE("derivatives of every unary function match finite differences") {
    const char* exprs[] = {"sin(z0)", "cos(z0)", "tan(z0)",  "sinh(z0)", "cosh(z0)",
                           "tanh(z0)", "exp(z0)", "log(z0)", "sqrt(z0)", "atan(z0)",
                           "z0^3",     "1/z0",    "-z0^2"};
    for (const char* s : exprs) {
        auto e = parse(s, 0);
        auto d = e.diff("z0");
        for (double v : {0.3, 0.9, 1.7}) {
            const double h = 1e-6;
            const double fd =
                (e.evaluate(point({v + h})) - e.evaluate(point({v - h}))) / (2 * h);
            REQUIRE_THAT(d.evaluate(point({v})),
                         Catch::Matchers::WithinRel(fd, 1e-7) ||
                             Catch::Matchers::WithinAbs(fd, 1e-7));
        }
    }
}

TEST_CASE("property: symbolic derivative matches central differences") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> uni(-1.5, 1.5);
    const std::string vars[] = {"x", "z0", "z1", "z2"};
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto e = random_polynomial(rng);
        for (const auto& v : vars) {
            if (!e.depends_on(v)) continue;
            auto d = e.diff(v);
            JetPoint p = point({uni(rng), uni(rng), uni(rng), uni(rng)}, uni(rng));
            auto shifted = [&](double dv) {
                JetPoint q = p;
                if (v == "x") q.x += dv;
                else q.z[v[1] - '0'] += dv;
                return e.evaluate(q);
            };
            const double h = 1e-5;
            const double fd = (shifted(h) - shifted(-h)) / (2 * h);
            const double sym = d.evaluate(p);
            REQUIRE(std::abs(sym - fd) <= 1e-6 * std::max(1.0, std::abs(sym)));
            ++checked;
        }
    }
    REQUIRE(checked > 100);
}

TEST_CASE("total derivative D_x") {
    REQUIRE(total_derivative_x(parse("z0", 0)).str() == "z1");
    REQUIRE(total_derivative_x(parse("z0^2", 0)).str() == "2*z0*z1");
    REQUIRE(total_derivative_x(parse("x*z1", 1)).str() == "z1 + x*z2");
}

TEST_CASE("property: D_x is linear on the AST and satisfies the product rule") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> uni(-1.2, 1.2);
    for (int trial = 0; trial < 100; ++trial) {
        auto e1 = random_polynomial(rng, 2);
        auto e2 = random_polynomial(rng, 2);
        auto sum_rule = total_derivative_x(e1 + e2, 3);
        auto parts = total_derivative_x(e1, 3);
        auto parts2 = total_derivative_x(e2, 3);
        auto product_rule = total_derivative_x(e1 * e2, 3);
        auto expanded = e1 * total_derivative_x(e2, 3) + e2 * total_derivative_x(e1, 3);
        JetPoint p = point({uni(rng), uni(rng), uni(rng), uni(rng), uni(rng)}, uni(rng));
        const double lhs = sum_rule.evaluate(p);
        const double rhs = parts.evaluate(p) + parts2.evaluate(p);
        REQUIRE(lhs == rhs);  // exact: the AST of the sum is the sum of the ASTs
        const double pl = product_rule.evaluate(p);
        const double pr = expanded.evaluate(p);
        REQUIRE(std::abs(pl - pr) <= 1e-9 * std::max(1.0, std::abs(pl)));
    }
}

TEST_CASE("total derivative D_t along the prolongation") {
    auto F = parse("z2", 2);
    REQUIRE(total_derivative_t(parse("z0", 0), F).str() == "z2");
    REQUIRE(total_derivative_t(parse("t", 0), F).str() == "1");
    // D_t z1 = D_x F = z3 on solutions of z0_t = z2
    REQUIRE(total_derivative_t(parse("z1", 1), F).str() == "z3");
}

TEST_CASE("max_jet_order") {
    REQUIRE(parse("z2 + z0", 2).max_jet_order() == 2);
    REQUIRE(parse("x*t", 0).max_jet_order() == -1);
    REQUIRE(parse("sin(z1)", 1).max_jet_order() == 1);
}

TEST_CASE("constant folding keeps identities out of the AST") {
    REQUIRE(parse("0*z1 + z0", 1).str() == "z0");
    REQUIRE(parse("1*z0", 0).str() == "z0");
    REQUIRE(parse("z0^1", 0).str() == "z0");
    REQUIRE(parse("z0^0", 0).str() == "1");
    REQUIRE(parse("2*3 + 1", 0).str() == "7");
    REQUIRE(parse("0/z0", 0).str() == "0");
    REQUIRE(parse("--z0", 0).str() == "z0");
    REQUIRE(parse("sin(0)", 0).str() == "0");
}

TEST_CASE("round trip: printed expressions re-parse to the same values") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(-1.5, 1.5);
    for (int trial = 0; trial < 60; ++trial) {
        auto e = random_polynomial(rng);
        auto r = parse(e.str(), 3);
        JetPoint p = point({uni(rng), uni(rng), uni(rng), uni(rng)}, uni(rng));
        REQUIRE(e.evaluate(p) == Approx(r.evaluate(p)).margin(1e-12));
    }
}
