#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "stochsym/errors.hpp"
#include "stochsym/integrator.hpp"

using namespace stochsym;

namespace {

NoiseSample make_sample(const OneStepMethod& method, double h, const std::vector<double>& dw)
{
    NoiseSample s;
    s.h = h;
    s.indices = method.plan().indices();
    for (const auto& a : s.indices) {
        if (a.length() == 1)
            s.values.push_back(a[0] == 0 ? h : dw.at(static_cast<std::size_t>(a[0] - 1)));
        else if (a[0] == a[1] && a[0] != 0)
            s.values.push_back(0.5 * (dw.at(static_cast<std::size_t>(a[0] - 1)) * dw.at(static_cast<std::size_t>(a[0] - 1)) - h));
        else
            s.values.push_back(0.0);
    }
    return s;
}

HamiltonianSystem implicit_system()
{
    return make_system("nonseparable", 1, {parse("p^2*q^2/4 + p^2/2 + q^2/2"), parse("sigma*sin(q)")}, {{"sigma", 0.4}});
}

HamiltonianSystem two_dof()
{
    return make_system("coupled", 2, {parse("(p1^2 + p2^2)/2 + cos(q1 - q2) + q1^2/2"), parse("0.3*q1"), parse("0.2*sin(q2)")},
                       {});
}

} // namespace

TEST_SUITE("integrator") {

TEST_CASE("oscillator scheme is the stochastic symplectic Euler method")
{
    const auto sys = examples::oscillator(0.5);
    const auto scheme = weak_scheme(sys);
    CHECK(scheme.is_explicit());
    const double h = 0.1;
    for (double dw : {0.0, 0.3, -0.21}) {
        const PhasePoint x{{0.4}, {-1.2}};
        const auto y = step(scheme, x, make_sample(scheme, h, {dw}));
        const double p1 = 0.4 - h * -1.2 + 0.5 * dw;
        const double q1 = -1.2 + h * p1;
        CHECK(y.p[0] == doctest::Approx(p1).epsilon(1e-14));
        CHECK(y.q[0] == doctest::Approx(q1).epsilon(1e-14));
    }
}

TEST_CASE("synchrotron scheme step")
{
    const auto scheme = weak_scheme(examples::synchrotron(1.3, 0.3, 0.2));
    const double h = 0.05, w1 = 0.1, w2 = -0.07;
    const PhasePoint x{{0.2}, {0.9}};
    const auto y = step(scheme, x, make_sample(scheme, h, {w1, w2}));
    const double p1 = 0.2 - (h * 1.69 * std::sin(0.9) + w1 * 0.3 * std::cos(0.9) + w2 * 0.2 * std::sin(0.9));
    CHECK(y.p[0] == doctest::Approx(p1).epsilon(1e-14));
    CHECK(y.q[0] == doctest::Approx(0.9 + h * p1).epsilon(1e-14));
}

TEST_CASE("deterministic oscillator keeps its energy near 1 over a period")
{
    const auto scheme = weak_scheme(examples::oscillator(0.0));
    const int n = 628;
    const double h = 2 * std::numbers::pi / n;
    PhasePoint x{{0.0}, {1.0}};
    const auto zero = make_sample(scheme, h, {0.0});
    double max_dev = 0.0;
    for (int i = 0; i < n; ++i) {
        x = step(scheme, x, zero);
        max_dev = std::max(max_dev, std::abs(x.p[0] * x.p[0] + x.q[0] * x.q[0] - 1.0));
    }
    // Symplectic Euler conserves a modified energy, so the deviation stays O(h).
    CHECK(max_dev < h);
    CHECK(x.q[0] == doctest::Approx(1.0).epsilon(2 * h));
}

TEST_CASE("implicit schemes solve the momentum equation")
{
    const auto scheme = weak_scheme(implicit_system());
    CHECK_FALSE(scheme.is_explicit());
    const double h = 0.1, dw = 0.2;
    const PhasePoint x{{0.7}, {0.5}};
    StepStats stats;
    const auto y = step(scheme, x, make_sample(scheme, h, {dw}), &stats);
    // Residual of P = p - h dH0/dq(P,q) - dW dH1/dq(q) at the returned P.
    const double P = y.p[0], q = 0.5;
    const double res = P - 0.7 + h * (P * P * q / 2 + q) + dw * 0.4 * std::cos(q);
    CHECK(std::abs(res) < 1e-11);
    CHECK(stats.residual < 1e-11);
    CHECK(y.q[0] == doctest::Approx(q + h * (P * q * q / 2 + P)).epsilon(1e-12));
}

TEST_CASE("property: frozen-noise maps of generated schemes are symplectic")
{
    RngStream rng(31, 0);
    const std::vector<HamiltonianSystem> systems{examples::oscillator(0.5), examples::synchrotron(1.0, 0.3, 0.3),
                                                 implicit_system(), two_dof()};
    for (const auto& sys : systems) {
        for (int k : {1, 2}) {
            if (k == 2 && sys.d > 1)
                continue;
            const auto scheme = weak_scheme(sys, k);
            const auto trials = symplecticity_audit(scheme, 30, 1e-3, 0.1, rng, 1.0);
            double worst = 0.0;
            for (const auto& t : trials)
                worst = std::max(worst, t.defect);
            CHECK_MESSAGE(worst <= 1e-6, sys.name << " k=" << k);
        }
    }
    const EulerMaruyama em(examples::synchrotron(1.0, 0.3, 0.3));
    const auto em_trials = symplecticity_audit(em, 10, 0.1, 0.1, rng);
    double worst = 0.0;
    for (const auto& t : em_trials)
        worst = std::max(worst, t.defect);
    CHECK(worst > 1e-3);
}

TEST_CASE("Euler-Maruyama uses the Ito drift")
{
    const auto kubo = examples::kubo(0.5);
    const EulerMaruyama em(kubo);
    const double h = 0.01;
    const PhasePoint x{{0.3}, {0.8}};
    const auto y = step(em, x, make_sample(em, h, {0.0}));
    // f = (-q, p), Ito correction (1/2) g.grad g = -(sigma^2/2) (p, q).
    CHECK(y.p[0] == doctest::Approx(0.3 + h * (-0.8 - 0.125 * 0.3)).epsilon(1e-14));
    CHECK(y.q[0] == doctest::Approx(0.8 + h * (0.3 - 0.125 * 0.8)).epsilon(1e-14));
    const auto z = step(em, x, make_sample(em, h, {0.1}));
    CHECK(z.p[0] - y.p[0] == doctest::Approx(-0.5 * 0.8 * 0.1));
    CHECK(z.q[0] - y.q[0] == doctest::Approx(0.5 * 0.3 * 0.1));
}

TEST_CASE("midpoint rule is second order on deterministic problems")
{
    const MidpointSde mid(examples::oscillator(0.0));
    auto err = [&](double h) {
        const auto y = step(mid, PhasePoint{{0.0}, {1.0}}, make_sample(mid, h, {0.0}));
        return std::hypot(y.p[0] + std::sin(h), y.q[0] - std::cos(h));
    };
    CHECK(std::log2(err(0.1) / err(0.05)) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("simulate is reproducible and writes CSV")
{
    const auto scheme = weak_scheme(examples::synchrotron(1.0, 0.3, 0.3));
    RngStream a(7, 0), b(7, 0);
    const auto pa = simulate(scheme, {{0.0}, {1.0}}, 0.1, 20, a);
    const auto pb = simulate(scheme, {{0.0}, {1.0}}, 0.1, 20, b);
    CHECK(pa.size() == 21);
    CHECK(pa == pb);
    std::ostringstream os;
    write_path_csv(os, pa, 0.1);
    const std::string csv = os.str();
    CHECK(csv.rfind("step,time,p1,q1\n0,0,0,1\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 22);
    CHECK_THROWS_AS(simulate(scheme, {{0.0}, {1.0}}, 0.1, 0, a), DomainError);
    CHECK_THROWS_AS(simulate(scheme, {{0.0}, {1.0}}, -0.1, 3, a), DomainError);
    CHECK_THROWS_AS(simulate(scheme, {{0.0, 1.0}, {1.0, 0.0}}, 0.1, 3, a), DomainError);
}

TEST_CASE("blow-up is reported as a numeric error")
{
    const auto sys = make_system("cubic", 1, {parse("p^2/2 - q^4"), parse("0*q")}, {});
    const auto scheme = weak_scheme(sys);
    RngStream rng(1, 0);
    CHECK_THROWS_AS(simulate(scheme, {{0.0}, {10.0}}, 0.5, 50, rng), NumericError);
}

}
