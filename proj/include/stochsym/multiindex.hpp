#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stochsym {

/// A word over {0,...,m} labelling an iterated stochastic integral. Entry 0
/// stands for dt, entry r >= 1 for the r-th Wiener process.
///
/// The empty word is representable (it is the neutral element of
/// concatenation and the result of dropping the last entry of a length-1
/// index); public combinatorial operations reject it.
class MultiIndex {
public:
    MultiIndex() = default;
    MultiIndex(std::vector<int> entries, int m);
    MultiIndex(std::initializer_list<int> entries, int m);

    /// The index (0,...,0) with k zeros.
    static MultiIndex zeros(int k, int m);

    /// Reads the "(0,1,1)" textual form. "()" is the empty index.
    static MultiIndex parse(std::string_view text, int m);

    std::size_t length() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    int m() const noexcept { return m_; }
    std::span<const int> entries() const noexcept { return entries_; }
    int operator[](std::size_t i) const { return entries_[i]; }
    int back() const;

    /// Number of zero entries.
    std::size_t zero_count() const noexcept;

    /// The index with its final entry removed (alpha-minus).
    MultiIndex drop_last() const;

    /// Entries of *this followed by the entries of `other`.
    MultiIndex concat(const MultiIndex& other) const;
    MultiIndex append(int entry) const;

    /// "(0,1,1)"
    std::string str() const;

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b);

private:
    std::vector<int> entries_;
    int m_ = 0;
};

/// Which family of iterated integrals a multi-index labels: J (Stratonovich)
/// or I (Ito).
enum class Basis { Stratonovich, Ito };

std::string basis_name(Basis b);

/// Graded order: shorter indices first, lexicographic within a length.
struct GradedLess {
    bool operator()(const MultiIndex& a, const MultiIndex& b) const;
};

/// All indices over {0,...,m} with 1 <= length <= max_len, in graded order.
std::vector<MultiIndex> all_indices(int m, std::size_t max_len);

/// Bag of multi-indices with explicit multiplicities.
class IndexMultiset {
public:
    using Storage = std::map<MultiIndex, std::int64_t>;

    void add(const MultiIndex& index, std::int64_t multiplicity = 1);
    void merge(const IndexMultiset& other, std::int64_t weight = 1);

    std::int64_t multiplicity(const MultiIndex& index) const;
    /// Sum of multiplicities.
    std::int64_t total() const noexcept;
    /// Number of distinct elements.
    std::size_t distinct() const noexcept { return counts_.size(); }
    bool empty() const noexcept { return counts_.empty(); }

    Storage::const_iterator begin() const { return counts_.begin(); }
    Storage::const_iterator end() const { return counts_.end(); }

    /// "{(0,1) x1, (1,0) x1}"
    std::string str() const;

    friend bool operator==(const IndexMultiset&, const IndexMultiset&) = default;

private:
    Storage counts_;
};

/// Lambda_{a1,a2}: the multiset of interleavings of a1 and a2, built by the
/// last-letter recursion (base case {(j,j'),(j',j)} for two letters).
IndexMultiset lambda_pair(const MultiIndex& a1, const MultiIndex& a2);

/// Lambda_{a1,...,ak}, folded left to right over lambda_pair.
IndexMultiset lambda_multi(std::span<const MultiIndex> indices);

/// Multiplicity of beta in Lambda_{0_k, alpha}; Lambda_{0_0, alpha} = {alpha}.
std::int64_t tau_count(const MultiIndex& beta, int k, const MultiIndex& alpha);

/// Brute-force enumeration of all order-preserving interleavings. Independent
/// of the recursion in lambda_pair; used as its oracle.
inline constexpr std::size_t kShuffleOracleMaxLength = 10;
IndexMultiset shuffle_oracle(std::span<const MultiIndex> indices);

} // namespace stochsym
