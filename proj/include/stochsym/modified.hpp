#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stochsym/expr.hpp"
#include "stochsym/genfun.hpp"
#include "stochsym/multiindex.hpp"
#include "stochsym/noise.hpp"
#include "stochsym/system.hpp"

namespace stochsym {

enum class NoiseClass { Additive, HalfMultiplicative, FullyMultiplicative };

std::string noise_class_name(NoiseClass c);

/// Additive: every H_r (r >= 1) has a constant gradient. Half-multiplicative:
/// each H_r depends on q only or on p only. Fully multiplicative otherwise.
NoiseClass classify_noise(const HamiltonianSystem& sys);

/// H~_j(h) = H_j + sum_i h^i H_j^{[i]}.
struct ModifiedSystem {
    HamiltonianSystem base;
    std::vector<std::vector<Expr>> corrections; // corrections[j][i-1] = H_j^{[i]}

    /// Highest correction order carried.
    int order() const;
    const Expr& correction(int j, int i) const;
};

/// H_j^{[1]} = -1/2 sum_k dH_0/dp_k dH_j/dq_k. Requires H_0 = T(p) + V(q) and
/// q-only noise Hamiltonians; throws UnsupportedSystem otherwise.
ModifiedSystem first_order_modified(const HamiltonianSystem& sys);

/// Unknown corrections H_j^{[1]} as abstract functions named "Hj_1".
ModifiedSystem abstract_corrections(const HamiltonianSystem& sys);

/// All first-order corrections zero: the base system itself.
ModifiedSystem zero_corrections(const HamiltonianSystem& sys);

/// H~_j as polynomials in the parameter "h".
std::vector<Expr> modified_hamiltonians(const ModifiedSystem& msys);

/// The system with h frozen. h = 0 returns the base system; h < 0 throws.
HamiltonianSystem modified_sde(const ModifiedSystem& msys, double h);

/// "dp = (...) dt + (...) o dW1" lines, one per coordinate.
std::vector<std::string> render_sde(const HamiltonianSystem& sys);

/// Gbar_beta = sum_k k! tau_beta(0_k, alpha) G_alpha^{[k]}. The powers of h
/// are absorbed into J_{0_k}, so the coefficients themselves are h-free.
struct GbarSeries {
    std::size_t max_len = 0;
    std::map<MultiIndex, Expr, GradedLess> terms;
    /// parts[beta][k]: the contribution of the G^{[k]}.
    std::map<MultiIndex, std::vector<Expr>, GradedLess> parts;

    const Expr& coefficient(const MultiIndex& beta) const;
};

GbarSeries gbar_series(const ModifiedSystem& msys, std::size_t max_len);

/// S = sum_beta C_beta J_beta with coefficients in (P, q).
using JSeries = std::map<MultiIndex, Expr, GradedLess>;

JSeries scheme_j_series(const GenFunSeries& ito_series);
JSeries gbar_j_series(const GbarSeries& g);

/// One pair E[prod_k (S_qk)^a_k (S_Pk)^b_k] compared between two series.
struct PairResidual {
    std::string name;              // e.g. "S_q^2*S_P"
    std::vector<int> q_powers;     // per component
    std::vector<int> p_powers;
    std::vector<double> residual;  // max over points, per h
    /// Difference of the h^w coefficients, max over points, w = 1..k+1.
    std::vector<double> coefficient_gap;
    double slope = 0.0;
    bool below_floor = false;      // identical within rounding at every h
};

struct MatchingReport {
    int k = 1;
    std::vector<double> hs;
    std::size_t points = 0;
    std::vector<PairResidual> pairs;
    double min_slope = 0.0;        // over pairs above the floor
    bool passed = false;           // min_slope >= k + 0.5
    bool verified_dimension = true; // false for d > 1
};

inline constexpr double kMatchingFloor = 1e-13;

/// Exact moment matching: E[J products] come from joint_moment, expanded to
/// total weight k + 1. Phase points are uniform in [-1,1]^{2d}.
MatchingReport matching_residuals(const JSeries& scheme, const JSeries& modified, const HamiltonianSystem& sys,
                                  int k, const std::vector<double>& hs, std::size_t points, RngStream& rng);

/// Scheme of weak order 1 for sys against the Gbar series of msys.
MatchingReport matching_residuals(const HamiltonianSystem& sys, const ModifiedSystem& msys, int k,
                                  const std::vector<double>& hs, std::size_t points, RngStream& rng);

/// Monte Carlo estimate of one pair for both series at one point (common
/// simulated integrals), for cross-checking the exact route.
struct PairEstimate {
    MomentEstimate scheme;
    MomentEstimate modified;
    MomentEstimate difference;
};

PairEstimate matching_pair_mc(const JSeries& scheme, const JSeries& modified, const HamiltonianSystem& sys,
                              const std::vector<double>& point, const std::vector<int>& q_powers,
                              const std::vector<int>& p_powers, double h, int substeps, std::int64_t samples,
                              RngStream& rng);

/// Exact counterpart of matching_pair_mc: (scheme, modified) expectations.
std::pair<double, double> matching_pair_exact(const JSeries& scheme, const JSeries& modified,
                                              const HamiltonianSystem& sys, const std::vector<double>& point,
                                              const std::vector<int>& q_powers, const std::vector<int>& p_powers,
                                              double h, double max_weight);

} // namespace stochsym
