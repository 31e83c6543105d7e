#pragma once

#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "stochsym/expr.hpp"
#include "stochsym/genfun.hpp"
#include "stochsym/noise.hpp"
#include "stochsym/system.hpp"

namespace stochsym {

struct PhasePoint {
    std::vector<double> p;
    std::vector<double> q;

    /// (p1..pd, q1..qd)
    std::vector<double> flat() const;
    static PhasePoint from_flat(std::span<const double> x);
    friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

struct SolverOptions {
    double tolerance = 1e-12; // on max|residual| / (1 + max|p|)
    int fixed_point_iterations = 50;
    int newton_iterations = 30;
};

struct StepStats {
    int iterations = 0;
    double residual = 0.0;
    bool used_newton = false;
};

/// A one-step method on x = (p1..pd, q1..qd) driven by the Ito values of a
/// noise plan.
class OneStepMethod {
public:
    virtual ~OneStepMethod() = default;

    virtual int d() const noexcept = 0;
    virtual const NoisePlan& plan() const noexcept = 0;
    /// Size of the scratch buffer advance() needs.
    virtual std::size_t workspace_size() const noexcept = 0;
    /// Advances x in place. Throws NumericError on NaN/inf states or solver
    /// failure.
    virtual void advance(std::span<double> x, std::span<const double> noise, std::span<double> workspace,
                         StepStats& stats) const = 0;
};

/// Coefficient of I_gamma in the update of p and q.
struct SchemeTerm {
    MultiIndex gamma;
    std::vector<Expr> dq; // dC_gamma/dq_k, P in the p slot
    std::vector<Expr> dp; // dC_gamma/dP_k
};

/// The map P = p - dS/dq(P,q), Q = q + dS/dP(P,q) of an Ito-basis series.
class SchemeMap final : public OneStepMethod {
public:
    explicit SchemeMap(const GenFunSeries& ito_series, SolverOptions options = {});

    int d() const noexcept override { return d_; }
    const NoisePlan& plan() const noexcept override { return plan_; }
    std::size_t workspace_size() const noexcept override;
    void advance(std::span<double> x, std::span<const double> noise, std::span<double> workspace,
                 StepStats& stats) const override;

    /// True when dS/dq does not involve P: the step needs no solver.
    bool is_explicit() const noexcept { return explicit_; }
    const std::vector<SchemeTerm>& terms() const noexcept { return terms_; }
    const SolverOptions& options() const noexcept { return options_; }

private:
    void grad_q(std::span<const double> pq, std::span<const double> noise, std::span<double> out,
                std::span<double> regs) const;

    int d_ = 1;
    SolverOptions options_;
    NoisePlan plan_;
    std::vector<SchemeTerm> terms_;
    Program dq_prog_; // outputs [gamma][k]
    Program dp_prog_;
    bool explicit_ = true;
};

/// Explicit midpoint rule for the Stratonovich system; plan {(1)..(m)} plus (0).
class MidpointSde final : public OneStepMethod {
public:
    explicit MidpointSde(const HamiltonianSystem& sys);

    int d() const noexcept override { return d_; }
    const NoisePlan& plan() const noexcept override { return plan_; }
    std::size_t workspace_size() const noexcept override;
    void advance(std::span<double> x, std::span<const double> noise, std::span<double> workspace,
                 StepStats& stats) const override;

private:
    int d_;
    int m_;
    NoisePlan plan_;
    Program field_; // drift (2d), then diffusion r = 1..m (2d each)
};

/// Euler-Maruyama on the Ito form of the system (non-symplectic control).
class EulerMaruyama final : public OneStepMethod {
public:
    explicit EulerMaruyama(const HamiltonianSystem& sys);

    int d() const noexcept override { return d_; }
    const NoisePlan& plan() const noexcept override { return plan_; }
    std::size_t workspace_size() const noexcept override;
    void advance(std::span<double> x, std::span<const double> noise, std::span<double> workspace,
                 StepStats& stats) const override;

private:
    int d_;
    int m_;
    NoisePlan plan_;
    Program field_; // Ito drift (2d), then diffusion
};

/// Drift and diffusion vector fields of the Stratonovich system on
/// x = (p, q): f = (-dH0/dq, dH0/dp), g_r = (-dHr/dq, dHr/dp).
std::vector<Expr> stratonovich_fields(const HamiltonianSystem& sys);

/// One step with an explicit sample. Throws DomainError if the sample lacks
/// an index of the method's plan.
PhasePoint step(const OneStepMethod& method, const PhasePoint& x, const NoiseSample& w,
                StepStats* stats = nullptr);

/// n_steps fresh samples from rng; returns all n_steps + 1 states.
std::vector<PhasePoint> simulate(const OneStepMethod& method, const PhasePoint& x0, double h, int n_steps,
                                 RngStream& rng, NoiseMode mode = NoiseMode::GaussianExact);

/// Writes "step,time,p1..pd,q1..qd".
void write_path_csv(std::ostream& os, const std::vector<PhasePoint>& path, double h);

/// max |M^T J M - J| for the central-difference Jacobian M (eps 1e-6) of the
/// frozen-noise map.
double symplecticity_defect(const OneStepMethod& method, const PhasePoint& x, const NoiseSample& w);

struct SymplecticityTrial {
    double h = 0.0;
    PhasePoint x;
    double defect = 0.0;
};

/// Random (x, w, h) triples: x uniform in [-box, box]^{2d}, h uniform in
/// [h_lo, h_hi], w Gaussian for the method's plan.
std::vector<SymplecticityTrial> symplecticity_audit(const OneStepMethod& method, int trials, double h_lo,
                                                    double h_hi, RngStream& rng, double box = 2.0);

/// The weak order 1 scheme of a system: series to length 2, Ito truncation k=1.
SchemeMap weak_scheme(const HamiltonianSystem& sys, int weak_order = 1, SolverOptions options = {});

} // namespace stochsym
