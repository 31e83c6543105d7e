#include "stochsym/genfun.hpp"

#include <algorithm>

#include "stochsym/errors.hpp"

namespace stochsym {

const Expr& GenFunSeries::coefficient(const MultiIndex& alpha) const
{
    auto it = terms.find(alpha);
    if (it == terms.end())
        throw DomainError("index " + alpha.str() + " not present in " + basis_name(basis) + " series");
    return it->second.coefficient;
}

std::vector<LabeledEntry> duplicate_split(const MultiIndex& alpha)
{
    std::vector<LabeledEntry> out;
    std::map<int, int> seen;
    for (int e : alpha.entries())
        out.push_back({e, seen[e]++});
    return out;
}

std::string labeled_str(const std::vector<LabeledEntry>& entries)
{
    std::map<int, int> count;
    for (const auto& e : entries)
        ++count[e.value];
    std::string out = "(";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i)
            out += ',';
        out += std::to_string(entries[i].value);
        if (count[entries[i].value] > 1)
            out += static_cast<char>('a' + entries[i].label);
    }
    return out + ")";
}

// ---------------------------------------------------------------------------

CoefficientRecursion::CoefficientRecursion(int d, std::vector<std::vector<Expr>> hamiltonians)
    : d_(d), order_(0), h_(std::move(hamiltonians))
{
    if (d < 1)
        throw DomainError("dimension must be >= 1");
    if (h_.empty())
        throw DomainError("need at least H_0");
    for (const auto& s : h_)
        order_ = std::max(order_, static_cast<int>(s.size()) - 1);
    for (auto& s : h_) {
        s.resize(static_cast<std::size_t>(order_) + 1, Expr(0.0));
        for (auto& e : s)
            e = simplify(e);
    }
}

CoefficientRecursion::Series CoefficientRecursion::multiply(const Series& a, const Series& b) const
{
    Series out(a.size());
    for (std::size_t n = 0; n < out.size(); ++n) {
        std::vector<Expr> terms;
        for (std::size_t i = 0; i <= n; ++i) {
            if (a[i].is_constant(0.0) || b[n - i].is_constant(0.0))
                continue;
            terms.push_back(a[i] * b[n - i]);
        }
        out[n] = simplify(Expr::nary(NodeKind::Add, std::move(terms)));
    }
    return out;
}

const CoefficientRecursion::Series& CoefficientRecursion::p_derivative(const MultiIndex& alpha, int k)
{
    auto key = std::make_pair(alpha, k);
    if (auto it = dg_.find(key); it != dg_.end())
        return it->second;
    Series s = coefficient(alpha);
    for (auto& e : s)
        e = diff(e, momentum(k));
    return dg_.emplace(std::move(key), std::move(s)).first->second;
}

const CoefficientRecursion::Series& CoefficientRecursion::q_derivatives(int r, std::vector<int> ks)
{
    std::sort(ks.begin(), ks.end());
    auto key = std::make_pair(r, ks);
    if (auto it = dh_.find(key); it != dh_.end())
        return it->second;
    Series s = h_[static_cast<std::size_t>(r)];
    for (int k : ks)
        for (auto& e : s)
            e = diff(e, position(k));
    return dh_.emplace(std::move(key), std::move(s)).first->second;
}

namespace {

bool all_zero(const std::vector<Expr>& s)
{
    return std::all_of(s.begin(), s.end(), [](const Expr& e) { return e.is_constant(0.0); });
}

double factorial(int n)
{
    double f = 1.0;
    for (int i = 2; i <= n; ++i)
        f *= i;
    return f;
}

// Ordered tuples (alpha_1..alpha_i) whose shuffle contains beta, with the
// multiplicity of beta in that shuffle. Each assignment of beta's labelled
// positions onto i nonempty ordered groups is one derivation.
std::map<std::vector<MultiIndex>, int> split_tuples(const MultiIndex& beta, int i)
{
    const std::vector<LabeledEntry> labeled = duplicate_split(beta);
    const std::size_t n = labeled.size();
    std::map<std::vector<MultiIndex>, int> out;
    std::vector<int> assign(n, 0);
    for (;;) {
        std::vector<std::vector<int>> groups(static_cast<std::size_t>(i));
        for (std::size_t pos = 0; pos < n; ++pos)
            groups[static_cast<std::size_t>(assign[pos])].push_back(labeled[pos].value);
        if (std::none_of(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); })) {
            std::vector<MultiIndex> tuple;
            for (auto& g : groups)
                tuple.emplace_back(std::move(g), beta.m());
            ++out[tuple];
        }
        std::size_t pos = 0;
        while (pos < n && ++assign[pos] == i)
            assign[pos++] = 0;
        if (pos == n)
            break;
    }
    return out;
}

} // namespace

const std::vector<Expr>& CoefficientRecursion::coefficient(const MultiIndex& alpha)
{
    if (alpha.empty())
        throw DomainError("G is undefined for the empty index");
    if (alpha.m() != m())
        throw DomainError("index " + alpha.str() + " has noise count " + std::to_string(alpha.m()) +
                          ", system has " + std::to_string(m()));
    if (auto it = g_.find(alpha); it != g_.end())
        return it->second;

    const int r = alpha.back();
    Series result;
    if (alpha.length() == 1) {
        result = h_[static_cast<std::size_t>(r)];
    } else {
        const MultiIndex beta = alpha.drop_last();
        const int len = static_cast<int>(beta.length());
        std::vector<std::vector<Expr>> acc(static_cast<std::size_t>(order_) + 1);
        for (int i = 1; i <= len; ++i) {
            const auto tuples = split_tuples(beta, i);
            const double inv_fact = 1.0 / factorial(i);
            std::vector<int> ks(static_cast<std::size_t>(i), 1);
            for (;;) {
                const Series& dh = q_derivatives(r, ks);
                if (!all_zero(dh)) {
                    for (const auto& [tuple, count] : tuples) {
                        Series prod = dh;
                        for (int j = 0; j < i && !all_zero(prod); ++j)
                            prod = multiply(prod, p_derivative(tuple[static_cast<std::size_t>(j)],
                                                               ks[static_cast<std::size_t>(j)]));
                        for (std::size_t n = 0; n < prod.size(); ++n)
                            if (!prod[n].is_constant(0.0))
                                acc[n].push_back(Expr(count * inv_fact) * prod[n]);
                    }
                }
                std::size_t pos = 0;
                while (pos < ks.size() && ++ks[pos] > d_)
                    ks[pos++] = 1;
                if (pos == ks.size())
                    break;
            }
        }
        for (auto& terms : acc)
            result.push_back(simplify(Expr::nary(NodeKind::Add, std::move(terms))));
    }
    return g_.emplace(alpha, std::move(result)).first->second;
}

// ---------------------------------------------------------------------------

namespace {

CoefficientRecursion plain_recursion(const HamiltonianSystem& sys)
{
    std::vector<std::vector<Expr>> hs;
    for (const auto& h : sys.hamiltonians)
        hs.push_back({h});
    return CoefficientRecursion(sys.d, std::move(hs));
}

} // namespace

Expr g_coefficient(const HamiltonianSystem& sys, const MultiIndex& alpha)
{
    if (alpha.empty())
        throw DomainError("G is undefined for the empty index");
    auto rec = plain_recursion(sys);
    return rec.coefficient(alpha).front();
}

GenFunSeries series(const HamiltonianSystem& sys, std::size_t max_len)
{
    if (max_len < 1)
        throw DomainError("max_len must be >= 1");
    if (max_len > kMaxSeriesLength)
        throw CapExceeded("max_len " + std::to_string(max_len) + " exceeds cap " + std::to_string(kMaxSeriesLength));
    sys.validate();
    auto rec = plain_recursion(sys);
    GenFunSeries out;
    out.system = sys;
    out.basis = Basis::Stratonovich;
    out.max_len = max_len;
    out.truncation = "all J_alpha with l(alpha) <= " + std::to_string(max_len);
    for (const auto& alpha : all_indices(sys.m, max_len)) {
        Expr c = rec.coefficient(alpha).front();
        const bool zero = is_zero(c);
        out.terms.emplace(alpha, SeriesTerm{std::move(c), zero});
    }
    return out;
}

std::map<MultiIndex, double> stratonovich_to_ito(const MultiIndex& alpha)
{
    std::map<MultiIndex, double> out;
    if (alpha.empty()) {
        out.emplace(alpha, 1.0);
        return out;
    }
    const int last = alpha.back();
    const MultiIndex head = alpha.drop_last();
    for (const auto& [gamma, c] : stratonovich_to_ito(head))
        out[gamma.append(last)] += c;
    if (alpha.length() >= 2 && last != 0 && alpha[alpha.length() - 2] == last) {
        for (const auto& [gamma, c] : stratonovich_to_ito(head.drop_last()))
            out[gamma.append(0)] += 0.5 * c;
    }
    return out;
}

std::map<MultiIndex, double> ito_to_stratonovich(const MultiIndex& alpha)
{
    // J_alpha = I_alpha + (shorter I terms); solve recursively for I_alpha.
    std::map<MultiIndex, double> out;
    out[alpha] += 1.0;
    for (const auto& [gamma, c] : stratonovich_to_ito(alpha)) {
        if (gamma == alpha)
            continue;
        for (const auto& [beta, c2] : ito_to_stratonovich(gamma))
            out[beta] -= c * c2;
    }
    std::erase_if(out, [](const auto& kv) { return kv.second == 0.0; });
    return out;
}

GenFunSeries to_ito_truncation(const GenFunSeries& s, int weak_order)
{
    if (s.basis != Basis::Stratonovich)
        throw DomainError("to_ito_truncation expects a Stratonovich series");
    if (weak_order != 1 && weak_order != 2)
        throw DomainError("weak order must be 1 or 2, got " + std::to_string(weak_order));
    const std::size_t k = static_cast<std::size_t>(weak_order);
    if (s.max_len < 2 * k)
        throw DomainError("insufficient max_len " + std::to_string(s.max_len) + " for weak order " +
                          std::to_string(weak_order) + ": need Stratonovich terms up to length " +
                          std::to_string(2 * k));
    std::map<MultiIndex, std::vector<Expr>, GradedLess> acc;
    for (const auto& gamma : all_indices(s.system.m, k))
        acc[gamma];
    for (const auto& [alpha, term] : s.terms) {
        if (alpha.length() > 2 * k || term.zero)
            continue;
        for (const auto& [gamma, c] : stratonovich_to_ito(alpha)) {
            if (gamma.length() > k)
                continue;
            acc[gamma].push_back(c == 1.0 ? term.coefficient : Expr(c) * term.coefficient);
        }
    }
    GenFunSeries out;
    out.system = s.system;
    out.basis = Basis::Ito;
    out.max_len = k;
    out.truncation = "I_gamma with l(gamma) <= " + std::to_string(k) + " (weak order " + std::to_string(k) + ")";
    for (auto& [gamma, terms] : acc) {
        Expr c = simplify(Expr::nary(NodeKind::Add, std::move(terms)));
        const bool zero = is_zero(c);
        out.terms.emplace(gamma, SeriesTerm{std::move(c), zero});
    }
    return out;
}

std::vector<std::string> derivation_report(const GenFunSeries& s)
{
    std::vector<std::string> lines;
    for (const auto& [alpha, term] : s.terms)
        lines.push_back(alpha.str() + "; " + basis_name(s.basis) + "; " +
                        to_string(term.coefficient, RenderOptions{'P'}) + "; " + (term.zero ? "true" : "false"));
    return lines;
}

} // namespace stochsym
