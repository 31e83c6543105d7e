#include "doctest.h"

#include <cmath>
#include <random>

#include "stochsym/errors.hpp"
#include "stochsym/expr.hpp"

using namespace stochsym;

namespace {

// Random expression over p, q, p2 and the parameter a. Depth bounds keep
// values moderate on [-1.5, 1.5].
Expr random_expr(std::mt19937& g, int depth)
{
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 4 : 12);
    switch (pick(g)) {
    case 0: return Expr::p();
    case 1: return Expr::q();
    case 2: return Expr::p(2);
    case 3: return Expr::param("a");
    case 4: return Expr(static_cast<double>(static_cast<int>(g() % 7) - 3) / 2.0);
    case 5:
    case 6: return random_expr(g, depth - 1) + random_expr(g, depth - 1);
    case 7: return random_expr(g, depth - 1) - random_expr(g, depth - 1);
    case 8:
    case 9: return random_expr(g, depth - 1) * random_expr(g, depth - 1);
    case 10: return sin(random_expr(g, depth - 1));
    case 11: return cos(random_expr(g, depth - 1));
    default: return pow(random_expr(g, depth - 1), static_cast<int>(g() % 3) + 1);
    }
}

Binding random_binding(std::mt19937& g)
{
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    return {{"p", u(g)}, {"q", u(g)}, {"p2", u(g)}, {"q2", u(g)}, {"a", u(g)}};
}

} // namespace

TEST_SUITE("expr") {

TEST_CASE("parse basics")
{
    const Binding b{{"p", 0.3}, {"q", -0.7}, {"sigma", 0.5}};
    CHECK(eval(parse("(p^2 + q^2)/2"), b) == doctest::Approx(0.5 * (0.09 + 0.49)));
    CHECK(eval(parse("-sigma*q"), b) == doctest::Approx(0.35));
    CHECK(eval(parse("2^3 - 2*3"), b) == doctest::Approx(2.0));
    CHECK(eval(parse("q^(-1)"), b) == doctest::Approx(-1.0 / 0.7));
    CHECK(eval(parse("sin(q)*cos(p) + exp(p)"), b) ==
          doctest::Approx(std::sin(-0.7) * std::cos(0.3) + std::exp(0.3)));
    CHECK(parse("P") == Expr::p());
    CHECK(parse("q3") == Expr::q(3));
}

TEST_CASE("parse errors carry a position")
{
    auto position_of = [](const char* s) {
        try {
            parse(s);
        } catch (const ParseError& e) {
            return e.position();
        }
        return std::string::npos;
    };
    CHECK(position_of("p + * q") == 4);
    CHECK(position_of("sin(q") == 5);
    CHECK(position_of("p $ q") == 2);
    CHECK(position_of("") == 0);
    CHECK(position_of("q^1.5") != std::string::npos);
}

TEST_CASE("simplify collects like terms")
{
    CHECK(simplify(parse("p*q - q*p")).is_constant(0.0));
    CHECK(simplify(parse("(p+q)^2")) == simplify(parse("p^2 + 2*p*q + q^2")));
    CHECK(simplify(parse("sigma*q/2 + sigma*q/2")) == simplify(parse("sigma*q")));
    CHECK(simplify(parse("0*sin(q) + 1*p")) == Expr::p());
    CHECK(is_zero(parse("sin(q)^2 + cos(q)^2 - 1")));
    CHECK_FALSE(is_zero(parse("sin(q)^2 - cos(q)^2")));
}

TEST_CASE("derivatives")
{
    CHECK(diff(parse("p^3*q"), "p") == simplify(parse("3*p^2*q")));
    CHECK(diff(parse("-omega^2*cos(q)"), "q") == simplify(parse("omega^2*sin(q)")));
    CHECK(diff(parse("sigma*p"), "q").is_constant(0.0));
    CHECK_THROWS_AS(diff(parse("p"), "sigma"), DomainError);
    const auto f = Expr::abstract("F");
    const auto fp = diff(f, momentum());
    CHECK(fp.kind() == NodeKind::Abstract);
    CHECK(diff(fp, position()) == diff(diff(f, position()), momentum()));
    CHECK(parse("D[p,q](F())") == diff(fp, position()));
}

TEST_CASE("property: simplify, print and compile preserve values")
{
    std::mt19937 g(7);
    for (int trial = 0; trial < 300; ++trial) {
        const Expr e = random_expr(g, 4);
        const Expr s = simplify(e);
        const Expr round = parse(to_string(e));
        const Expr exprs[] = {e};
        const Program prog = Program::compile(exprs, 2, {{"a", 0.75}});
        for (int k = 0; k < 3; ++k) {
            Binding b = random_binding(g);
            b["a"] = 0.75;
            const double v = eval(e, b);
            const double tol = 1e-9 * (1.0 + std::abs(v));
            CHECK(std::abs(eval(s, b) - v) <= tol);
            CHECK(std::abs(eval(round, b) - v) <= tol);
            double out = 0.0;
            const double state[] = {b["p"], b["p2"], b["q"], b["q2"]};
            prog.run(state, std::span<double>(&out, 1));
            CHECK(std::abs(out - v) <= tol);
        }
    }
}

TEST_CASE("property: diff agrees with central differences")
{
    std::mt19937 g(8);
    for (int trial = 0; trial < 200; ++trial) {
        const Expr e = random_expr(g, 3);
        for (const char* var : {"p", "q"}) {
            const Expr de = diff(e, var);
            Binding b = random_binding(g);
            const double x = b[var];
            const double eps = 1e-5;
            b[var] = x + eps;
            const double up = eval(e, b);
            b[var] = x - eps;
            const double down = eval(e, b);
            b[var] = x;
            const double fd = (up - down) / (2 * eps);
            CHECK(std::abs(eval(de, b) - fd) <= 1e-5 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("evaluation errors")
{
    CHECK_THROWS_AS(eval(parse("sigma*q"), {{"q", 1.0}}), NumericError);
    CHECK_THROWS_AS(eval(parse("1/(q-q)"), {{"q", 1.0}}), NumericError);
    const Expr e[] = {parse("sigma*q")};
    CHECK_THROWS_AS(Program::compile(e, 1, {}), NumericError);
    const Expr f[] = {parse("q2")};
    CHECK_THROWS_AS(Program::compile(f, 1, {}), DomainError);
}

TEST_CASE("free symbols and classes")
{
    const auto fs = free_symbols(parse("sigma*sin(q) + p2*F()"));
    CHECK(fs.parameters == std::set<std::string>{"sigma"});
    CHECK(fs.variables.size() == 2);
    CHECK(fs.abstracts.size() == 1);
    CHECK(depends_on(parse("p*q - q*p + q"), PhaseVar::Kind::Q));
    CHECK_FALSE(depends_on(parse("p*q - q*p + q"), PhaseVar::Kind::P));
    CHECK(is_polynomial(parse("p^2*q - 3*sigma")));
    CHECK_FALSE(is_polynomial(parse("sin(q)")));
    CHECK_FALSE(is_polynomial(parse("p/q")));
}

}
