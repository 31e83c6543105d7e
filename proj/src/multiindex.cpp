#include "stochsym/multiindex.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "stochsym/errors.hpp"

namespace stochsym {

MultiIndex::MultiIndex(std::vector<int> entries, int m) : entries_(std::move(entries)), m_(m)
{
    if (m < 0)
        throw DomainError("noise count m must be nonnegative, got " + std::to_string(m));
    for (int e : entries_) {
        if (e < 0 || e > m)
            throw DomainError("multi-index entry " + std::to_string(e) + " outside {0,...," + std::to_string(m) + "}");
    }
}

MultiIndex::MultiIndex(std::initializer_list<int> entries, int m) : MultiIndex(std::vector<int>(entries), m) {}

MultiIndex MultiIndex::zeros(int k, int m)
{
    if (k < 0)
        throw DomainError("zero run length must be nonnegative");
    return MultiIndex(std::vector<int>(static_cast<std::size_t>(k), 0), m);
}

MultiIndex MultiIndex::parse(std::string_view text, int m)
{
    std::size_t i = 0;
    auto skip = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
    };
    skip();
    if (i >= text.size() || text[i] != '(')
        throw ParseError("multi-index must start with '('", i);
    ++i;
    std::vector<int> entries;
    skip();
    if (i < text.size() && text[i] == ')') {
        ++i;
    } else {
        for (;;) {
            skip();
            std::size_t start = i;
            int value = 0;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
                value = value * 10 + (text[i++] - '0');
            if (i == start)
                throw ParseError("expected a digit in multi-index", i);
            entries.push_back(value);
            skip();
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            if (i < text.size() && text[i] == ')') {
                ++i;
                break;
            }
            throw ParseError("expected ',' or ')' in multi-index", i);
        }
    }
    skip();
    if (i != text.size())
        throw ParseError("trailing characters after multi-index", i);
    return MultiIndex(std::move(entries), m);
}

int MultiIndex::back() const
{
    if (entries_.empty())
        throw DomainError("empty index has no last entry");
    return entries_.back();
}

std::size_t MultiIndex::zero_count() const noexcept
{
    return static_cast<std::size_t>(std::count(entries_.begin(), entries_.end(), 0));
}

MultiIndex MultiIndex::drop_last() const
{
    if (entries_.empty())
        throw DomainError("empty index has no α−");
    MultiIndex out = *this;
    out.entries_.pop_back();
    return out;
}

MultiIndex MultiIndex::concat(const MultiIndex& other) const
{
    if (other.m_ != m_)
        throw DomainError("cannot concatenate indices with different noise counts (" + std::to_string(m_) + " vs " +
                          std::to_string(other.m_) + ")");
    MultiIndex out = *this;
    out.entries_.insert(out.entries_.end(), other.entries_.begin(), other.entries_.end());
    return out;
}

MultiIndex MultiIndex::append(int entry) const
{
    if (entry < 0 || entry > m_)
        throw DomainError("multi-index entry " + std::to_string(entry) + " outside {0,...," + std::to_string(m_) + "}");
    MultiIndex out = *this;
    out.entries_.push_back(entry);
    return out;
}

std::string MultiIndex::str() const
{
    std::string out = "(";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (i)
            out += ',';
        out += std::to_string(entries_[i]);
    }
    out += ')';
    return out;
}

std::string basis_name(Basis b) { return b == Basis::Stratonovich ? "Stratonovich" : "Ito"; }

std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b)
{
    if (auto c = std::lexicographical_compare_three_way(a.entries_.begin(), a.entries_.end(), b.entries_.begin(),
                                                        b.entries_.end());
        c != 0)
        return c;
    return a.m_ <=> b.m_;
}

bool GradedLess::operator()(const MultiIndex& a, const MultiIndex& b) const
{
    if (a.length() != b.length())
        return a.length() < b.length();
    return a < b;
}

std::vector<MultiIndex> all_indices(int m, std::size_t max_len)
{
    std::vector<MultiIndex> out;
    std::vector<MultiIndex> layer{MultiIndex({}, m)};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<MultiIndex> next;
        for (const auto& prefix : layer)
            for (int e = 0; e <= m; ++e)
                next.push_back(prefix.append(e));
        out.insert(out.end(), next.begin(), next.end());
        layer = std::move(next);
    }
    return out;
}

void IndexMultiset::add(const MultiIndex& index, std::int64_t multiplicity)
{
    if (multiplicity <= 0)
        return;
    counts_[index] += multiplicity;
}

void IndexMultiset::merge(const IndexMultiset& other, std::int64_t weight)
{
    for (const auto& [index, count] : other)
        add(index, count * weight);
}

std::int64_t IndexMultiset::multiplicity(const MultiIndex& index) const
{
    auto it = counts_.find(index);
    return it == counts_.end() ? 0 : it->second;
}

std::int64_t IndexMultiset::total() const noexcept
{
    std::int64_t sum = 0;
    for (const auto& [index, count] : counts_)
        sum += count;
    return sum;
}

std::string IndexMultiset::str() const
{
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& [index, count] : counts_) {
        if (!first)
            os << ", ";
        first = false;
        os << index.str() << " x" << count;
    }
    os << '}';
    return os.str();
}

namespace {

// Words of one length packed base (m+1), first entry most significant, so
// appending a letter keeps a sorted list sorted.
using Packed = std::vector<std::pair<std::uint64_t, std::int64_t>>;

Packed append_letter(const Packed& in, std::uint64_t base, int letter)
{
    Packed out;
    out.reserve(in.size());
    for (const auto& [key, count] : in)
        out.emplace_back(key * base + static_cast<std::uint64_t>(letter), count);
    return out;
}

Packed merge_sorted(const Packed& a, const Packed& b)
{
    Packed out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            out.push_back(a[i++]);
        } else if (i == a.size() || b[j].first < a[i].first) {
            out.push_back(b[j++]);
        } else {
            out.emplace_back(a[i].first, a[i].second + b[j].second);
            ++i;
            ++j;
        }
    }
    return out;
}

void check_packable(std::size_t len, int m)
{
    if (static_cast<double>(len) * std::log2(static_cast<double>(m) + 1.0) >= 63.0)
        throw CapExceeded("Lambda operands too long to enumerate");
}

// Last-letter recursion evaluated over the table of prefix pairs:
// cell (i, j) = cell(i-1, j) a1[i] + cell(i, j-1) a2[j], where a prefix paired
// with the empty word is the prefix itself. Cell (1, 1) is the two-letter base
// case {(j,j'),(j',j)}.
Packed shuffle_packed(const std::vector<int>& a1, const std::vector<int>& a2, std::uint64_t base)
{
    const std::size_t l1 = a1.size();
    const std::size_t l2 = a2.size();
    auto prefix = [base](const std::vector<int>& a, std::size_t len) {
        std::uint64_t key = 0;
        for (std::size_t i = 0; i < len; ++i)
            key = key * base + static_cast<std::uint64_t>(a[i]);
        return key;
    };
    std::vector<Packed> prev(l2 + 1), cur(l2 + 1);
    for (std::size_t j = 0; j <= l2; ++j)
        prev[j] = {{prefix(a2, j), 1}};
    for (std::size_t i = 1; i <= l1; ++i) {
        cur[0] = {{prefix(a1, i), 1}};
        for (std::size_t j = 1; j <= l2; ++j)
            cur[j] = merge_sorted(append_letter(prev[j], base, a1[i - 1]), append_letter(cur[j - 1], base, a2[j - 1]));
        std::swap(prev, cur);
    }
    return std::move(prev[l2]);
}

std::vector<int> unpack(std::uint64_t key, std::size_t len, std::uint64_t base)
{
    std::vector<int> entries(len);
    for (std::size_t k = len; k-- > 0;) {
        entries[k] = static_cast<int>(key % base);
        key /= base;
    }
    return entries;
}

IndexMultiset to_multiset(const Packed& packed, std::size_t len, int m)
{
    const auto base = static_cast<std::uint64_t>(m) + 1;
    IndexMultiset out;
    for (const auto& [key, count] : packed)
        out.add(MultiIndex(unpack(key, len, base), m), count);
    return out;
}

std::vector<int> entries_of(const MultiIndex& a)
{
    return {a.entries().begin(), a.entries().end()};
}

void shuffle_walk(std::span<const MultiIndex> words, std::vector<std::size_t>& cursor, std::vector<int>& current,
                  int m, IndexMultiset& out)
{
    bool any = false;
    for (std::size_t w = 0; w < words.size(); ++w) {
        if (cursor[w] == words[w].length())
            continue;
        any = true;
        current.push_back(words[w][cursor[w]]);
        ++cursor[w];
        shuffle_walk(words, cursor, current, m, out);
        --cursor[w];
        current.pop_back();
    }
    if (!any)
        out.add(MultiIndex(current, m));
}

} // namespace

IndexMultiset lambda_pair(const MultiIndex& a1, const MultiIndex& a2)
{
    if (a1.empty() || a2.empty())
        throw DomainError("Lambda requires nonempty operands");
    if (a1.m() != a2.m())
        throw DomainError("Lambda operands have different noise counts");
    const std::size_t len = a1.length() + a2.length();
    check_packable(len, a1.m());
    const auto base = static_cast<std::uint64_t>(a1.m()) + 1;
    return to_multiset(shuffle_packed(entries_of(a1), entries_of(a2), base), len, a1.m());
}

IndexMultiset lambda_multi(std::span<const MultiIndex> indices)
{
    if (indices.size() < 2)
        throw DomainError("Lambda over a list needs at least 2 operands, got " + std::to_string(indices.size()));
    std::size_t len = 0;
    for (const auto& a : indices) {
        if (a.empty())
            throw DomainError("Lambda requires nonempty operands");
        if (a.m() != indices[0].m())
            throw DomainError("Lambda operands have different noise counts");
        len += a.length();
    }
    const int m = indices[0].m();
    check_packable(len, m);
    const auto base = static_cast<std::uint64_t>(m) + 1;

    std::size_t acc_len = indices[0].length() + indices[1].length();
    Packed acc = shuffle_packed(entries_of(indices[0]), entries_of(indices[1]), base);
    for (std::size_t k = 2; k < indices.size(); ++k) {
        const auto next_word = entries_of(indices[k]);
        std::map<std::uint64_t, std::int64_t> next;
        for (const auto& [key, count] : acc)
            for (const auto& [beta, c] : shuffle_packed(unpack(key, acc_len, base), next_word, base))
                next[beta] += c * count;
        acc.assign(next.begin(), next.end());
        acc_len += next_word.size();
    }
    return to_multiset(acc, acc_len, m);
}

std::int64_t tau_count(const MultiIndex& beta, int k, const MultiIndex& alpha)
{
    if (k < 0)
        throw DomainError("tau_count requires k >= 0");
    if (k == 0)
        return beta == alpha ? 1 : 0;
    if (beta.length() != alpha.length() + static_cast<std::size_t>(k))
        return 0;
    if (alpha.empty())
        return beta == MultiIndex::zeros(k, beta.m()) ? 1 : 0;
    return lambda_pair(MultiIndex::zeros(k, alpha.m()), alpha).multiplicity(beta);
}

IndexMultiset shuffle_oracle(std::span<const MultiIndex> indices)
{
    if (indices.size() < 2)
        throw DomainError("shuffle oracle needs at least 2 words");
    std::size_t total = 0;
    for (const auto& w : indices)
        total += w.length();
    if (total > kShuffleOracleMaxLength)
        throw CapExceeded("shuffle oracle total length " + std::to_string(total) + " exceeds cap " +
                          std::to_string(kShuffleOracleMaxLength));
    std::vector<std::size_t> cursor(indices.size(), 0);
    std::vector<int> current;
    IndexMultiset out;
    shuffle_walk(indices, cursor, current, indices[0].m(), out);
    return out;
}

} // namespace stochsym
