#pragma once

#include <map>
#include <string>
#include <vector>

#include "stochsym/expr.hpp"
#include "stochsym/multiindex.hpp"
#include "stochsym/system.hpp"

namespace stochsym {

struct SeriesTerm {
    Expr coefficient;
    bool zero = false;
};

/// Truncated generating function S(P,q) = sum_alpha C_alpha X_alpha with X = J
/// (Stratonovich) or I (Ito). Coefficients are stored with P in the p slot.
struct GenFunSeries {
    HamiltonianSystem system;
    Basis basis = Basis::Stratonovich;
    std::size_t max_len = 0;
    std::map<MultiIndex, SeriesTerm, GradedLess> terms;
    std::string truncation;

    /// Throws DomainError if alpha is not in the series.
    const Expr& coefficient(const MultiIndex& alpha) const;
};

inline constexpr std::size_t kMaxSeriesLength = 4;

/// A multi-index entry with an occurrence label: the second 1 in (1,1,0) is
/// (1, 1) and renders as "1b".
struct LabeledEntry {
    int value = 0;
    int label = 0;
    friend auto operator<=>(const LabeledEntry&, const LabeledEntry&) = default;
};

std::vector<LabeledEntry> duplicate_split(const MultiIndex& alpha);

/// "(1a,1b,0)"; entries without duplicates keep their bare digit.
std::string labeled_str(const std::vector<LabeledEntry>& entries);

/// Coefficients of the recursion for H_j given as truncated power series in
/// an auxiliary parameter h: hamiltonians[j][k] is H_j^{[k]}. Each G_alpha is
/// returned as its series (G_alpha^{[0]}, G_alpha^{[1]}, ...). With a single
/// term per H_j this is the plain coefficient recursion.
class CoefficientRecursion {
public:
    CoefficientRecursion(int d, std::vector<std::vector<Expr>> hamiltonians);

    int d() const noexcept { return d_; }
    int m() const noexcept { return static_cast<int>(h_.size()) - 1; }
    /// Highest power of h carried.
    int order() const noexcept { return order_; }

    /// Memoized; throws DomainError for the empty index or entries > m.
    const std::vector<Expr>& coefficient(const MultiIndex& alpha);

private:
    using Series = std::vector<Expr>;

    const Series& p_derivative(const MultiIndex& alpha, int k);
    const Series& q_derivatives(int r, std::vector<int> ks);
    Series multiply(const Series& a, const Series& b) const;

    int d_;
    int order_;
    std::vector<Series> h_;
    std::map<MultiIndex, Series> g_;
    std::map<std::pair<MultiIndex, int>, Series> dg_;
    std::map<std::pair<int, std::vector<int>>, Series> dh_;
};

/// G_alpha for the system, simplified.
Expr g_coefficient(const HamiltonianSystem& sys, const MultiIndex& alpha);

/// Stratonovich series with every index of length 1..max_len.
GenFunSeries series(const HamiltonianSystem& sys, std::size_t max_len);

/// J_alpha written in Ito integrals: J_alpha = sum_gamma c_gamma I_gamma.
std::map<MultiIndex, double> stratonovich_to_ito(const MultiIndex& alpha);
/// The inverse relation: I_alpha = sum_beta c_beta J_beta.
std::map<MultiIndex, double> ito_to_stratonovich(const MultiIndex& alpha);

/// Ito-basis truncation for weak order k in {1,2}: keeps I_gamma with
/// l(gamma) <= k, with coefficients collected from every J_alpha in the
/// input. Requires the input to reach length 2k, the longest J_alpha that
/// still folds into an I_gamma of length <= k.
GenFunSeries to_ito_truncation(const GenFunSeries& s, int weak_order);

/// One line per index: "alpha; basis; coefficient; is_zero".
std::vector<std::string> derivation_report(const GenFunSeries& s);

} // namespace stochsym
