#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "stochsym/multiindex.hpp"

namespace stochsym {

enum class NoiseMode { GaussianExact, WeakOrder2Discrete };

/// Deterministic random stream identified by (seed, stream). Paths use
/// stream = path index.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    bool coin() { return (engine_() >> 63) != 0; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
    std::uniform_real_distribution<double> uniform_;
};

/// Ito integrals over one step of length h, for the indices of a plan.
struct NoiseSample {
    double h = 0.0;
    NoiseMode mode = NoiseMode::GaussianExact;
    std::vector<MultiIndex> indices;
    std::vector<double> values; // aligned with indices

    /// Throws DomainError for indices not in the sample.
    double value(const MultiIndex& alpha) const;
};

/// Validated list of Ito indices (length <= 2) a scheme needs each step.
class NoisePlan {
public:
    NoisePlan() = default;
    NoisePlan(int m, std::vector<MultiIndex> indices);

    int m() const noexcept { return m_; }
    const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
    bool needs_mixed_pairs() const noexcept { return mixed_; }

    /// Draws increments and fills `out` (aligned with indices()).
    void draw(double h, NoiseMode mode, RngStream& rng, std::span<double> increments, std::span<double> out) const;

    /// Fills `out` from given Wiener increments; mixed pairs draw their
    /// auxiliary sign from rng.
    void fill(double h, std::span<const double> increments, RngStream& rng, std::span<double> out) const;

private:
    int m_ = 0;
    std::vector<MultiIndex> indices_;
    bool mixed_ = false;
};

/// Weak substitutes: (0) -> h, (r) -> dW_r, (r,r) -> (dW_r^2 - h)/2,
/// (r,s) -> (dW_r dW_s - xi_rs)/2 with xi_rs = -xi_sr = +-h, (0,r) and (r,0) ->
/// h dW_r / 2, (0,0) -> h^2/2. dW_r is N(0,h) or, in the discrete mode,
/// +-sqrt(3h) with probability 1/6 each and 0 with probability 2/3.
NoiseSample sample(double h, int m, const std::vector<MultiIndex>& needed, NoiseMode mode, RngStream& rng);

/// Welford accumulator for sample means and standard errors.
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats& other);
    std::int64_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept;
    double stderr_of_mean() const noexcept;

private:
    std::int64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Simulates J_alpha (trapezoidal, Stratonovich) and I_alpha (left point,
/// Ito) for a set of indices and all their prefixes on a substep grid.
class IntegralPath {
public:
    IntegralPath(int m, const std::vector<MultiIndex>& indices);

    void simulate(double h, int substeps, RngStream& rng);

    double J(const MultiIndex& alpha) const;
    double I(const MultiIndex& alpha) const;
    double value(Basis basis, const MultiIndex& alpha) const
    {
        return basis == Basis::Stratonovich ? J(alpha) : I(alpha);
    }
    double increment(int r) const { return totals_.at(static_cast<std::size_t>(r)); }

private:
    std::size_t slot(const MultiIndex& alpha) const;

    int m_;
    std::vector<MultiIndex> nodes_; // prefix-closed, graded order
    std::vector<std::ptrdiff_t> parent_;
    std::vector<int> last_;
    std::vector<double> j_, i_, j_prev_, i_prev_, totals_;
};

struct MomentEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t samples = 0;
};

inline constexpr double kOracleWorkCap = 4e9; // substeps * samples * nodes

/// Monte Carlo estimate of E[prod_i J_{alpha_i}^{power_i}] over [0,h].
MomentEstimate moment_oracle(const std::vector<MultiIndex>& alphas, const std::vector<int>& powers, double h,
                             int substeps, std::int64_t samples, RngStream& rng);

/// Exact E[J_alpha] over [0,h] from the recursion E J_alpha(t) = int_0^t E J_{alpha-}
/// when the last entry is 0, = (1/2) int_0^t E J_{(alpha-)-} when the last two
/// entries are equal and nonzero, and 0 otherwise.
double stratonovich_expectation(const MultiIndex& alpha, double h);
/// Same, as (C, w) with E[J_alpha] = C h^w.
std::pair<double, double> stratonovich_moment_coefficient(const MultiIndex& alpha);
/// Exact E[prod J_{alpha_i}] through the shuffle identity.
double product_expectation(std::span<const MultiIndex> alphas, double h);

/// E[prod J_{alpha_i}] = C h^w, from the Stratonovich product rule applied to
/// the whole product at once (no shuffle expansion). Memoized per thread.
std::pair<double, double> joint_moment(std::vector<MultiIndex> factors);

} // namespace stochsym
