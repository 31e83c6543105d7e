#include "doctest.h"

#include <cmath>

#include "stochsym/errors.hpp"
#include "stochsym/integrator.hpp"
#include "stochsym/modified.hpp"

using namespace stochsym;

namespace {

MultiIndex ix(const char* s, int m) { return MultiIndex::parse(s, m); }

bool same(const Expr& a, const char* b) { return simplify(a) == simplify(parse(b)); }

bool zero_diff(const Expr& a, const Expr& b) { return is_zero(simplify(a - b)); }

} // namespace

TEST_SUITE("modified") {

TEST_CASE("noise classes")
{
    CHECK(classify_noise(examples::oscillator(0.5)) == NoiseClass::Additive);
    CHECK(classify_noise(examples::synchrotron(1, 0.3, 0.3)) == NoiseClass::HalfMultiplicative);
    CHECK(classify_noise(examples::kubo(0.5)) == NoiseClass::FullyMultiplicative);
    const auto p_only = make_system("p-noise", 1, {parse("p^2/2"), parse("p^2")}, {});
    CHECK(classify_noise(p_only) == NoiseClass::HalfMultiplicative);
    CHECK_THROWS_AS(first_order_modified(p_only), UnsupportedSystem);
}

TEST_CASE("fully multiplicative noise is rejected")
{
    try {
        first_order_modified(examples::kubo(0.5));
        FAIL("expected UnsupportedSystem");
    } catch (const UnsupportedSystem& e) {
        CHECK(std::string(e.what()).find("fully multiplicative") != std::string::npos);
    }
}

TEST_CASE("oscillator corrections")
{
    const auto ms = first_order_modified(examples::oscillator(0.5));
    const Expr h0 = ms.correction(0, 1);
    const Expr h1 = ms.correction(1, 1);
    CHECK(same(diff(h0, "P"), "-q/2"));
    CHECK(same(diff(h0, "q"), "-P/2"));
    CHECK(same(diff(h1, "P"), "sigma/2"));
    CHECK(same(diff(h1, "q"), "0"));
    // The two h^2 matching conditions for the drift correction.
    CHECK(zero_diff(Expr(0.5) * Expr::param("sigma") * diff(diff(h1, "P"), "q") - diff(h0, "q"), parse("P/2")));
    CHECK(zero_diff(Expr(0.5) * Expr::param("sigma") * diff(diff(h1, "P"), "P") - diff(h0, "P"), parse("q/2")));
}

TEST_CASE("oscillator modified equation")
{
    const auto ms = first_order_modified(examples::oscillator(0.5));
    const auto ht = modified_hamiltonians(ms);
    CHECK(same(-diff(ht[0], "q"), "-q + h*p/2"));
    CHECK(same(diff(ht[0], "p"), "p - h*q/2"));
    CHECK(same(-diff(ht[1], "q"), "sigma"));
    CHECK(same(diff(ht[1], "p"), "h*sigma/2"));
}

TEST_CASE("synchrotron corrections and modified equation")
{
    const auto ms = first_order_modified(examples::synchrotron(1, 0.3, 0.3));
    const Expr h0 = ms.correction(0, 1), h1 = ms.correction(1, 1), h2 = ms.correction(2, 1);
    CHECK(same(diff(h1, "P"), "-sigma1*cos(q)/2"));
    CHECK(same(diff(h1, "q"), "sigma1*P*sin(q)/2"));
    CHECK(same(diff(h2, "P"), "-sigma2*sin(q)/2"));
    CHECK(same(diff(h2, "q"), "-sigma2*P*cos(q)/2"));
    CHECK(same(diff(h0, "q"), "-omega^2*P*cos(q)/2"));
    CHECK(same(diff(h0, "P"), "-omega^2*sin(q)/2"));

    // The four h^2 conditions hold for the derived corrections.
    const Expr s1 = Expr::param("sigma1"), s2 = Expr::param("sigma2"), q = Expr::q(), P = Expr::p();
    auto d = [](const Expr& e, const char* v) { return diff(e, v); };
    CHECK(zero_diff(d(h0, "q") + Expr(0.5) * (-s1 * sin(q) * d(h1, "P") + s1 * cos(q) * d(d(h1, "P"), "q")) +
                        Expr(0.5) * (s2 * cos(q) * d(h2, "P") + s2 * sin(q) * d(d(h2, "P"), "q")),
                    parse("-omega^2*P*cos(q)/2 + sigma1^2*sin(q)*cos(q)/2 - sigma2^2*sin(q)*cos(q)/2")));
    CHECK(zero_diff(d(h0, "P") + Expr(0.5) * s1 * cos(q) * d(d(h1, "P"), "P") +
                        Expr(0.5) * s2 * sin(q) * d(d(h2, "P"), "P"),
                    parse("-omega^2*sin(q)/2")));
    CHECK(zero_diff(Expr(2.0) * (s1 * cos(q) * d(h1, "q") + s2 * sin(q) * d(h2, "q")),
                    (s1 * s1 - s2 * s2) * P * sin(q) * cos(q)));
    CHECK(zero_diff(Expr(2.0) * (s1 * cos(q) * d(h1, "P") + s2 * sin(q) * d(h2, "P")),
                    -s1 * s1 * cos(q) * cos(q) - s2 * s2 * sin(q) * sin(q)));

    const auto ht = modified_hamiltonians(ms);
    CHECK(same(-diff(ht[0], "q"), "-omega^2*sin(q) + h*omega^2*p*cos(q)/2"));
    CHECK(same(-diff(ht[1], "q"), "-(sigma1*cos(q) + h*sigma1*p*sin(q)/2)"));
    CHECK(same(-diff(ht[2], "q"), "-(sigma2*sin(q) - h*sigma2*p*cos(q)/2)"));
    CHECK(same(diff(ht[0], "p"), "p - h*omega^2*sin(q)/2"));
    CHECK(same(diff(ht[1], "p"), "-h*sigma1*cos(q)/2"));
    CHECK(same(diff(ht[2], "p"), "-h*sigma2*sin(q)/2"));
}

TEST_CASE("instantiated modified systems")
{
    const auto osc = examples::oscillator(0.5);
    const auto ms = first_order_modified(osc);
    const auto base = modified_sde(ms, 0.0);
    CHECK(base.name == osc.name);
    REQUIRE(base.hamiltonians.size() == 2);
    CHECK(base.H(0) == osc.H(0));
    CHECK(base.H(1) == osc.H(1));
    CHECK_THROWS_AS(modified_sde(ms, -0.1), DomainError);
    CHECK_THROWS_AS(modified_sde(ms, std::nan("")), DomainError);

    const auto at = modified_sde(ms, 0.1);
    const auto lines = render_sde(at);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "dp = (0.05*p - q) dt + (sigma) o dW1");
    CHECK(lines[1] == "dq = (p - 0.05*q) dt + (0.05*sigma) o dW1");
    const auto z = modified_sde(zero_corrections(osc), 0.1);
    CHECK(zero_diff(z.H(0), osc.H(0)));
}

TEST_CASE("modified generating-function coefficients, oscillator")
{
    const auto g = gbar_series(abstract_corrections(examples::oscillator(0.5)), 4);
    auto c = [&](const char* beta) { return g.coefficient(ix(beta, 1)); };
    CHECK(same(c("(0)"), "(P^2+q^2)/2"));
    CHECK(same(c("(1)"), "-sigma*q"));
    CHECK(same(c("(1,1)"), "0"));
    CHECK(same(c("(0,1)"), "-sigma*P + H1_1()"));
    CHECK(same(c("(1,0)"), "H1_1()"));
    CHECK(same(c("(0,0)"), "P*q + 2*H0_1()"));
    CHECK(same(c("(1,1,0)"), "-sigma*D[p](H1_1())"));
    CHECK(same(c("(0,1,1)"), "sigma^2 - sigma*D[p](H1_1())"));
    CHECK(same(c("(1,1,1)"), "0"));
    CHECK(same(c("(1,1,1,1)"), "0"));
}

TEST_CASE("modified generating-function coefficients, synchrotron")
{
    const auto g = gbar_series(abstract_corrections(examples::synchrotron(1, 0.3, 0.3)), 4);
    auto c = [&](const char* beta) { return g.coefficient(ix(beta, 2)); };
    CHECK(same(c("(0)"), "-omega^2*cos(q) + P^2/2"));
    CHECK(same(c("(1)"), "sigma1*sin(q)"));
    CHECK(same(c("(2)"), "-sigma2*cos(q)"));
    for (const char* z : {"(1,1)", "(1,2)", "(2,1)", "(2,2)", "(1,1,1)", "(1,1,2)", "(1,2,1)", "(1,2,2)", "(2,1,1)",
                          "(2,1,2)", "(2,2,1)", "(2,2,2)"})
        CHECK_MESSAGE(same(c(z), "0"), z);
    CHECK(same(c("(0,1)"), "sigma1*P*cos(q) + H1_1()"));
    CHECK(same(c("(0,2)"), "sigma2*P*sin(q) + H2_1()"));
    CHECK(same(c("(1,0)"), "H1_1()"));
    CHECK(same(c("(2,0)"), "H2_1()"));
    CHECK(same(c("(0,0)"), "omega^2*P*sin(q) + 2*H0_1()"));
    CHECK(same(c("(1,1,0)"), "sigma1*cos(q)*D[p](H1_1())"));
    CHECK(same(c("(1,2,0)"), "sigma2*sin(q)*D[p](H1_1())"));
    CHECK(same(c("(2,1,0)"), "sigma1*cos(q)*D[p](H2_1())"));
    CHECK(same(c("(2,2,0)"), "sigma2*sin(q)*D[p](H2_1())"));
    CHECK(same(c("(0,1,1)"), "sigma1^2*cos(q)^2 + sigma1*cos(q)*D[p](H1_1())"));
    CHECK(same(c("(0,1,2)"), "sigma1*sigma2*sin(q)*cos(q) + sigma2*sin(q)*D[p](H1_1())"));
    CHECK(same(c("(0,2,1)"), "sigma1*sigma2*sin(q)*cos(q) + sigma1*cos(q)*D[p](H2_1())"));
    // sin^2 q, without a further factor cos q.
    CHECK(same(c("(0,2,2)"), "sigma2^2*sin(q)^2 + sigma2*sin(q)*D[p](H2_1())"));
    CHECK(same(c("(1,0,1)"), "sigma1*cos(q)*D[p](H1_1())"));
    CHECK(same(c("(1,0,2)"), "sigma2*sin(q)*D[p](H1_1())"));
    CHECK(same(c("(2,0,1)"), "sigma1*cos(q)*D[p](H2_1())"));
    CHECK(same(c("(2,0,2)"), "sigma2*sin(q)*D[p](H2_1())"));
    for (const auto& beta : all_indices(2, 4))
        if (beta.length() == 4 && beta.zero_count() == 0)
            CHECK_MESSAGE(same(g.coefficient(beta), "0"), beta.str());
}

TEST_CASE("moment matching separates corrected and uncorrected systems")
{
    const auto osc = examples::oscillator(0.5);
    RngStream rng(3, 0);
    const auto k1 = matching_residuals(osc, first_order_modified(osc), 1, {0.02, 0.01}, 5, rng);
    for (const auto& pr : k1.pairs)
        CHECK_MESSAGE(pr.below_floor, pr.name);
    CHECK(k1.passed);

    const auto k2 = matching_residuals(osc, first_order_modified(osc), 2, {0.02, 0.01}, 5, rng);
    CHECK(k2.passed);
    CHECK(k2.min_slope >= 2.5);
    CHECK(k2.verified_dimension);

    const auto bad = matching_residuals(osc, zero_corrections(osc), 2, {0.02, 0.01}, 5, rng);
    CHECK_FALSE(bad.passed);
    CHECK(bad.min_slope == doctest::Approx(2.0).epsilon(0.05));

    const auto syn = examples::synchrotron(1, 0.3, 0.3);
    CHECK(matching_residuals(syn, first_order_modified(syn), 2, {0.02, 0.01}, 5, rng).passed);
}

TEST_CASE("exact matching moments agree with simulated integrals")
{
    const auto osc = examples::oscillator(0.5);
    const auto scheme = scheme_j_series(to_ito_truncation(series(osc, 2), 1));
    const auto modified = gbar_j_series(gbar_series(first_order_modified(osc), 4));
    const std::vector<double> point{0.4, -0.3};
    const double h = 0.05;
    RngStream rng(8, 0);
    for (const auto& [qp, pp] : std::vector<std::pair<int, int>>{{1, 0}, {0, 1}, {2, 0}, {1, 1}}) {
        const auto exact = matching_pair_exact(scheme, modified, osc, point, {qp}, {pp}, h, 8.0);
        const auto mc = matching_pair_mc(scheme, modified, osc, point, {qp}, {pp}, h, 100, 20000, rng);
        CHECK(std::abs(mc.scheme.mean - exact.first) <= 4 * mc.scheme.std_error + 1e-3 * h);
        CHECK(std::abs(mc.modified.mean - exact.second) <= 4 * mc.modified.std_error + 1e-3 * h);
    }
}

}
