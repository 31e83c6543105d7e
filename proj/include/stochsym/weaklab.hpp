#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stochsym/expr.hpp"
#include "stochsym/integrator.hpp"
#include "stochsym/noise.hpp"
#include "stochsym/system.hpp"

namespace stochsym {

/// A polynomial test function of (p, q).
struct WeakObservable {
    std::string name;
    Expr expression;
};

/// Throws DomainError for non-polynomial expressions.
WeakObservable make_observable(std::string name, const Expr& e);
WeakObservable parse_observable(const std::string& text);

/// Moments of the linear oscillator dp = -q dt + sigma dW, dq = p dt started
/// at p = 0, q = 1. The state is Gaussian with
///   mean (-sin t, cos t),
///   cov_pp = sigma^2 (t/2 + sin 2t / 4), cov_qq = sigma^2 (t/2 - sin 2t / 4),
///   cov_pq = sigma^2 sin^2 t / 2.
struct OscillatorMoments {
    double mean_p = 0.0;
    double mean_q = 0.0;
    double energy = 0.0;  // E(p^2 + q^2) = 1 + sigma^2 t
    double mean_pq = 0.0; // E(pq) = sigma^2 (1 - cos 2t) / 4 - sin 2t / 2
    double cov_pp = 0.0;
    double cov_qq = 0.0;
    double cov_pq = 0.0;
};

OscillatorMoments oscillator_oracle(double t, double sigma);

/// E phi(p(t), q(t)) for a polynomial phi of degree <= 2 in (p, q).
double oscillator_expectation(const Expr& phi, double t, double sigma);

enum class ReferenceKind { AnalyticOracle, FineStepSDE, SchemeItself };

std::string reference_name(ReferenceKind k);

/// What the target is compared against.
///  AnalyticOracle: `exact(phi, T)` gives E phi at T.
///  FineStepSDE: the SDE `sde(h)` integrated by the explicit midpoint rule at
///    h_ref = min(hs)/ref_factor, with Richardson extrapolation
///    2 E[phi_{h_ref}] - E[phi_{2 h_ref}]. Common random numbers are optional.
///  SchemeItself: as FineStepSDE, but always with noise independent of the
///    scheme's (the plain weak comparison of scheme and modified equation).
struct Reference {
    ReferenceKind kind = ReferenceKind::AnalyticOracle;
    std::function<double(const WeakObservable& phi, double T)> exact;
    std::function<HamiltonianSystem(double h)> sde;
};

struct WeakStudy {
    double T = 1.0;
    std::vector<double> hs{0.2, 0.1, 0.05, 0.025};
    std::int64_t samples = 100000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    NoiseMode mode = NoiseMode::GaussianExact;
    PhasePoint x0{{0.0}, {1.0}};
    int ref_factor = 50;
    bool richardson = true;
    bool common_random_numbers = false;
};

inline constexpr std::int64_t kMinWeakSamples = 10000;
inline constexpr double kReferenceWorkCap = 2e10; // samples * fine steps

struct WeakRow {
    double h = 0.0;
    double error = 0.0;
    double std_error = 0.0;
    std::int64_t samples = 0;
    double target_mean = 0.0;
    double reference_mean = 0.0;
};

struct OrderFit {
    double order = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t rows_used = 0;
};

struct WeakErrorReport {
    std::string phi;
    ReferenceKind reference = ReferenceKind::AnalyticOracle;
    std::vector<WeakRow> rows;
    std::optional<OrderFit> fit;
    std::string fit_error; // set when the fit was impossible
};

/// Least-squares slope of log error against log h with a 95% t interval.
/// Uses rows with error > 3 SE; throws NumericError with fewer than 3.
OrderFit fit_order(const std::vector<WeakRow>& rows);

/// Weak errors of `target` for every observable (the paths are shared).
std::vector<WeakErrorReport> weak_error(const OneStepMethod& target, const Reference& reference,
                                        const std::vector<WeakObservable>& phis, const WeakStudy& study);

/// Sample mean and SE of each phi at T = n_steps * h over `samples` paths.
std::vector<MomentEstimate> ensemble_means(const OneStepMethod& method, const std::vector<WeakObservable>& phis,
                                           const PhasePoint& x0, double h, int n_steps, std::int64_t samples,
                                           std::uint64_t seed, unsigned threads,
                                           NoiseMode mode = NoiseMode::GaussianExact);

/// "phi,reference,h,error,stderr,samples" rows, then
/// "fitted_order,ci_low,ci_high" and its values (empty fields when no fit).
void write_weak_report(std::ostream& os, const WeakErrorReport& report);

} // namespace stochsym
