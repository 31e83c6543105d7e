#include "doctest.h"

#include "stochsym/errors.hpp"
#include "stochsym/genfun.hpp"
#include "stochsym/integrator.hpp"

using namespace stochsym;

namespace {

HamiltonianSystem symbolic_oscillator()
{
    return make_system("osc", 1, {parse("(p^2+q^2)/2"), parse("-sigma*q")}, {{"sigma", 0.5}});
}

HamiltonianSystem symbolic_synchrotron()
{
    return make_system("sync", 1, {parse("-omega^2*cos(q) + p^2/2"), parse("sigma1*sin(q)"), parse("-sigma2*cos(q)")},
                       {{"omega", 1.0}, {"sigma1", 0.3}, {"sigma2", 0.3}});
}

bool same(const Expr& a, const char* b)
{
    return simplify(a) == simplify(parse(b));
}

MultiIndex ix(const char* s, int m) { return MultiIndex::parse(s, m); }

// Update of a scheme map as coefficient lists: p_{n+1} = p_n - sum dq I,
// q_{n+1} = q_n + sum dp I.
Expr p_update(const SchemeMap& s, const char* gamma)
{
    for (const auto& t : s.terms())
        if (t.gamma.str() == gamma)
            return simplify(-t.dq[0]);
    return Expr(0.0);
}

Expr q_update(const SchemeMap& s, const char* gamma)
{
    for (const auto& t : s.terms())
        if (t.gamma.str() == gamma)
            return simplify(t.dp[0]);
    return Expr(0.0);
}

} // namespace

TEST_SUITE("genfun") {

TEST_CASE("oscillator coefficients")
{
    const auto sys = symbolic_oscillator();
    CHECK(same(g_coefficient(sys, ix("(0)", 1)), "(P^2+q^2)/2"));
    CHECK(same(g_coefficient(sys, ix("(1)", 1)), "-sigma*q"));
    CHECK(same(g_coefficient(sys, ix("(1,1)", 1)), "0"));
    CHECK(same(g_coefficient(sys, ix("(0,1)", 1)), "-sigma*P"));
    CHECK(same(g_coefficient(sys, ix("(1,0)", 1)), "0"));
    CHECK(same(g_coefficient(sys, ix("(1,1,1)", 1)), "0"));
    CHECK(same(g_coefficient(sys, ix("(0,0)", 1)), "P*q"));
}

TEST_CASE("synchrotron coefficients")
{
    const auto sys = symbolic_synchrotron();
    CHECK(same(g_coefficient(sys, ix("(0)", 2)), "-omega^2*cos(q) + P^2/2"));
    CHECK(same(g_coefficient(sys, ix("(1)", 2)), "sigma1*sin(q)"));
    CHECK(same(g_coefficient(sys, ix("(2)", 2)), "-sigma2*cos(q)"));
    CHECK(same(g_coefficient(sys, ix("(1,1)", 2)), "0"));
    CHECK(same(g_coefficient(sys, ix("(2,2)", 2)), "0"));
}

TEST_CASE("recursion weights repeated indices by their labelled assignments")
{
    // A noise Hamiltonian depending on both P and q makes every term of the
    // hand-expanded formulas visible.
    const Expr h0 = parse("P^2/2 + q^3");
    const Expr h1 = parse("P*q^2 + sin(q)");
    const auto sys = make_system("mixed", 1, {h0, h1}, {});
    auto dq = [](const Expr& e, int n = 1) {
        Expr r = e;
        for (int i = 0; i < n; ++i)
            r = diff(r, "q");
        return r;
    };
    auto dP = [](const Expr& e) { return diff(e, "P"); };
    const Expr g1 = h1;
    const Expr g0 = h0;
    const Expr g11 = dq(h1) * dP(g1);
    const Expr g01 = dq(h1) * dP(g0);
    const Expr g111 = dq(h1) * dP(g11) + dq(h1, 2) * dP(g1) * dP(g1);
    const Expr g011 = dq(h1) * dP(g01) + dq(h1, 2) * dP(g1) * dP(g0);
    const Expr g1111 = dq(h1) * dP(g111) + 3 * dq(h1, 2) * dP(g11) * dP(g1) + dq(h1, 3) * pow(dP(g1), 3);
    CHECK(g_coefficient(sys, ix("(1,1)", 1)) == simplify(g11));
    CHECK(g_coefficient(sys, ix("(0,1)", 1)) == simplify(g01));
    CHECK(g_coefficient(sys, ix("(1,1,1)", 1)) == simplify(g111));
    CHECK(g_coefficient(sys, ix("(0,1,1)", 1)) == simplify(g011));
    CHECK(g_coefficient(sys, ix("(1,1,1,1)", 1)) == simplify(g1111));
}

TEST_CASE("stratonovich and ito conversions")
{
    const auto j11 = stratonovich_to_ito(ix("(1,1)", 1));
    CHECK(j11.size() == 2);
    CHECK(j11.at(ix("(1,1)", 1)) == doctest::Approx(1.0));
    CHECK(j11.at(ix("(0)", 1)) == doctest::Approx(0.5));
    CHECK(stratonovich_to_ito(ix("(0,1)", 1)).size() == 1);
    CHECK(stratonovich_to_ito(ix("(1,2)", 2)).size() == 1);

    // The two conversions are mutually inverse.
    for (const auto& alpha : all_indices(2, 3)) {
        std::map<MultiIndex, double> back;
        for (const auto& [gamma, c] : stratonovich_to_ito(alpha))
            for (const auto& [beta, d] : ito_to_stratonovich(gamma))
                back[beta] += c * d;
        for (const auto& [beta, v] : back)
            CHECK(v == doctest::Approx(beta == alpha ? 1.0 : 0.0));
    }
}

TEST_CASE("weak order 1 generating functions")
{
    const auto osc = to_ito_truncation(series(symbolic_oscillator(), 2), 1);
    CHECK(osc.basis == Basis::Ito);
    CHECK(osc.terms.size() == 2);
    CHECK(same(osc.coefficient(ix("(0)", 1)), "(P^2+q^2)/2"));
    CHECK(same(osc.coefficient(ix("(1)", 1)), "-sigma*q"));

    const auto syn = to_ito_truncation(series(symbolic_synchrotron(), 2), 1);
    CHECK(syn.terms.size() == 3);
    CHECK(same(syn.coefficient(ix("(0)", 2)), "-omega^2*cos(q) + P^2/2"));
    CHECK(same(syn.coefficient(ix("(1)", 2)), "sigma1*sin(q)"));
    CHECK(same(syn.coefficient(ix("(2)", 2)), "-sigma2*cos(q)"));

    // Ito correction from G_(1,1) when it does not vanish.
    const auto mixed = make_system("mixed", 1, {parse("P^2/2"), parse("P*q")}, {});
    const auto s = to_ito_truncation(series(mixed, 2), 1);
    CHECK(same(s.coefficient(ix("(0)", 1)), "P^2/2 + P*q/2"));
}

TEST_CASE("scheme maps, coefficient by coefficient")
{
    const SchemeMap osc(to_ito_truncation(series(symbolic_oscillator(), 2), 1));
    CHECK(osc.is_explicit());
    CHECK(p_update(osc, "(0)") == simplify(parse("-q")));
    CHECK(p_update(osc, "(1)") == simplify(parse("sigma")));
    CHECK(q_update(osc, "(0)") == simplify(parse("P")));
    CHECK(q_update(osc, "(1)").is_constant(0.0));

    const SchemeMap syn(to_ito_truncation(series(symbolic_synchrotron(), 2), 1));
    CHECK(syn.is_explicit());
    CHECK(p_update(syn, "(0)") == simplify(parse("-omega^2*sin(q)")));
    CHECK(p_update(syn, "(1)") == simplify(parse("-sigma1*cos(q)")));
    CHECK(p_update(syn, "(2)") == simplify(parse("-sigma2*sin(q)")));
    CHECK(q_update(syn, "(0)") == simplify(parse("P")));
    CHECK(q_update(syn, "(1)").is_constant(0.0));
    CHECK(q_update(syn, "(2)").is_constant(0.0));
}

TEST_CASE("truncation guards")
{
    const auto sys = symbolic_oscillator();
    CHECK_THROWS_AS(series(sys, 5), CapExceeded);
    CHECK_THROWS_AS(series(sys, 0), DomainError);
    CHECK_THROWS_AS(to_ito_truncation(series(sys, 3), 2), DomainError);
    CHECK_THROWS_AS(to_ito_truncation(series(sys, 2), 3), DomainError);
    CHECK_THROWS_AS(g_coefficient(sys, ix("(2)", 2)), DomainError);
    CHECK_NOTHROW(to_ito_truncation(series(sys, 4), 2));
}

TEST_CASE("derivation report lines")
{
    const auto lines = derivation_report(series(symbolic_oscillator(), 2));
    REQUIRE(lines.size() >= 6);
    bool found = false;
    for (const auto& l : lines)
        found = found || l == "(0,1); Stratonovich; -sigma*P; false";
    CHECK(found);
}

}
