#include "stochsym/noise.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "stochsym/errors.hpp"

namespace stochsym {

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
}

double NoiseSample::value(const MultiIndex& alpha) const
{
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (indices[i] == alpha)
            return values[i];
    throw DomainError("noise sample has no value for " + alpha.str());
}

NoisePlan::NoisePlan(int m, std::vector<MultiIndex> indices) : m_(m), indices_(std::move(indices))
{
    for (const auto& a : indices_) {
        if (a.empty() || a.length() > 2)
            throw DomainError("noise sampling supports indices of length 1 or 2, got " + a.str());
        if (a.m() != m)
            throw DomainError("index " + a.str() + " has noise count " + std::to_string(a.m()) + ", expected " +
                              std::to_string(m));
        if (a.length() == 2 && a[0] != 0 && a[1] != 0 && a[0] != a[1])
            mixed_ = true;
    }
}

void NoisePlan::draw(double h, NoiseMode mode, RngStream& rng, std::span<double> increments,
                     std::span<double> out) const
{
    if (!(h > 0.0))
        throw DomainError("step size must be positive");
    const double sqrt_h = std::sqrt(h);
    const double jump = std::sqrt(3.0 * h);
    for (int r = 0; r < m_; ++r) {
        if (mode == NoiseMode::GaussianExact) {
            increments[static_cast<std::size_t>(r)] = sqrt_h * rng.normal();
        } else {
            const double u = rng.uniform();
            increments[static_cast<std::size_t>(r)] = u < 1.0 / 6.0 ? jump : (u < 1.0 / 3.0 ? -jump : 0.0);
        }
    }
    fill(h, increments, rng, out);
}

void NoisePlan::fill(double h, std::span<const double> dw, RngStream& rng, std::span<double> out) const
{
    // xi[r][s] for r < s; xi[s][r] = -xi[r][s].
    std::vector<double> xi;
    const auto mm = static_cast<std::size_t>(m_);
    if (mixed_) {
        xi.assign(mm * mm, 0.0);
        for (std::size_t r = 0; r < mm; ++r)
            for (std::size_t s = r + 1; s < mm; ++s) {
                const double v = rng.coin() ? h : -h;
                xi[r * mm + s] = v;
                xi[s * mm + r] = -v;
            }
    }
    auto w = [&](int r) { return r == 0 ? h : dw[static_cast<std::size_t>(r - 1)]; };
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        const MultiIndex& a = indices_[i];
        if (a.length() == 1) {
            out[i] = w(a[0]);
            continue;
        }
        const int r = a[0];
        const int s = a[1];
        if (r == 0 && s == 0)
            out[i] = 0.5 * h * h;
        else if (r == 0 || s == 0)
            out[i] = 0.5 * h * w(r == 0 ? s : r);
        else if (r == s)
            out[i] = 0.5 * (w(r) * w(r) - h);
        else
            out[i] = 0.5 * (w(r) * w(s) - xi[static_cast<std::size_t>(r - 1) * mm + static_cast<std::size_t>(s - 1)]);
    }
}

NoiseSample sample(double h, int m, const std::vector<MultiIndex>& needed, NoiseMode mode, RngStream& rng)
{
    if (!(h > 0.0))
        throw DomainError("step size must be positive, got " + std::to_string(h));
    NoisePlan plan(m, needed);
    NoiseSample out;
    out.h = h;
    out.mode = mode;
    out.indices = needed;
    out.values.resize(needed.size());
    std::vector<double> dw(static_cast<std::size_t>(m));
    plan.draw(h, mode, rng, dw, out.values);
    return out;
}

// ---------------------------------------------------------------------------

void RunningStats::add(double x)
{
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& o)
{
    if (o.n_ == 0)
        return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double delta = o.mean_ - mean_;
    mean_ += delta * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
}

double RunningStats::variance() const noexcept
{
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double RunningStats::stderr_of_mean() const noexcept
{
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

// ---------------------------------------------------------------------------

IntegralPath::IntegralPath(int m, const std::vector<MultiIndex>& indices) : m_(m)
{
    std::map<MultiIndex, int, GradedLess> closure;
    for (const auto& a : indices) {
        if (a.empty())
            throw DomainError("integrals need a nonempty index");
        if (a.m() != m)
            throw DomainError("index " + a.str() + " has the wrong noise count");
        MultiIndex prefix = a;
        while (!prefix.empty()) {
            closure[prefix] = 0;
            prefix = prefix.drop_last();
        }
    }
    for (const auto& [a, unused] : closure)
        nodes_.push_back(a);
    for (const auto& a : nodes_) {
        last_.push_back(a.back());
        if (a.length() == 1) {
            parent_.push_back(-1);
        } else {
            const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), a.drop_last(), GradedLess{});
            parent_.push_back(it - nodes_.begin());
        }
    }
    j_.assign(nodes_.size(), 0.0);
    i_.assign(nodes_.size(), 0.0);
    j_prev_ = j_;
    i_prev_ = i_;
    totals_.assign(static_cast<std::size_t>(m) + 1, 0.0);
}

void IntegralPath::simulate(double h, int substeps, RngStream& rng)
{
    if (!(h > 0.0))
        throw DomainError("step size must be positive");
    if (substeps < 1)
        throw DomainError("need at least one substep");
    std::fill(j_.begin(), j_.end(), 0.0);
    std::fill(i_.begin(), i_.end(), 0.0);
    std::fill(totals_.begin(), totals_.end(), 0.0);
    const double dt = h / substeps;
    const double sdt = std::sqrt(dt);
    std::vector<double> d(static_cast<std::size_t>(m_) + 1);
    d[0] = dt;
    for (int n = 0; n < substeps; ++n) {
        for (int r = 1; r <= m_; ++r)
            d[static_cast<std::size_t>(r)] = sdt * rng.normal();
        for (std::size_t r = 0; r < d.size(); ++r)
            totals_[r] += d[r];
        j_prev_ = j_;
        i_prev_ = i_;
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const double dw = d[static_cast<std::size_t>(last_[k])];
            if (parent_[k] < 0) {
                j_[k] += dw;
                i_[k] += dw;
            } else {
                const auto p = static_cast<std::size_t>(parent_[k]);
                j_[k] += 0.5 * (j_prev_[p] + j_[p]) * dw;
                i_[k] += i_prev_[p] * dw;
            }
        }
    }
}

std::size_t IntegralPath::slot(const MultiIndex& alpha) const
{
    const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), alpha, GradedLess{});
    if (it == nodes_.end() || *it != alpha)
        throw DomainError("integral " + alpha.str() + " was not requested");
    return static_cast<std::size_t>(it - nodes_.begin());
}

double IntegralPath::J(const MultiIndex& alpha) const { return j_[slot(alpha)]; }
double IntegralPath::I(const MultiIndex& alpha) const { return i_[slot(alpha)]; }

MomentEstimate moment_oracle(const std::vector<MultiIndex>& alphas, const std::vector<int>& powers, double h,
                             int substeps, std::int64_t samples, RngStream& rng)
{
    if (alphas.empty() || alphas.size() != powers.size())
        throw DomainError("moment oracle needs matching, nonempty index and power lists");
    if (substeps < 100)
        throw DomainError("moment oracle needs at least 100 substeps");
    if (samples < 2)
        throw DomainError("moment oracle needs at least 2 samples");
    if (!(h > 0.0))
        throw DomainError("step size must be positive");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (alphas[i].length() > 4)
            throw DomainError("moment oracle supports l(alpha) <= 4, got " + alphas[i].str());
        if (powers[i] < 0)
            throw DomainError("powers must be nonnegative");
    }
    IntegralPath path(alphas.front().m(), alphas);
    std::size_t nodes = 0;
    for (const auto& a : alphas)
        nodes += a.length();
    const double work = static_cast<double>(substeps) * static_cast<double>(samples) * static_cast<double>(nodes);
    if (work > kOracleWorkCap)
        throw CapExceeded("moment oracle work " + std::to_string(work) + " exceeds cap");
    RunningStats stats;
    for (std::int64_t s = 0; s < samples; ++s) {
        path.simulate(h, substeps, rng);
        double v = 1.0;
        for (std::size_t i = 0; i < alphas.size(); ++i)
            v *= std::pow(path.J(alphas[i]), powers[i]);
        stats.add(v);
    }
    return {stats.mean(), stats.stderr_of_mean(), stats.count()};
}

std::pair<double, double> stratonovich_moment_coefficient(const MultiIndex& alpha)
{
    if (alpha.empty())
        return {1.0, 0.0};
    const std::size_t l = alpha.length();
    if (alpha.back() == 0) {
        auto [c, w] = stratonovich_moment_coefficient(alpha.drop_last());
        return {c / (w + 1.0), w + 1.0};
    }
    if (l >= 2 && alpha[l - 2] == alpha.back()) {
        auto [c, w] = stratonovich_moment_coefficient(alpha.drop_last().drop_last());
        return {0.5 * c / (w + 1.0), w + 1.0};
    }
    return {0.0, 0.0};
}

double stratonovich_expectation(const MultiIndex& alpha, double h)
{
    if (alpha.empty())
        throw DomainError("expectation needs a nonempty index");
    const auto [c, w] = stratonovich_moment_coefficient(alpha);
    return c == 0.0 ? 0.0 : c * std::pow(h, w);
}

double product_expectation(std::span<const MultiIndex> alphas, double h)
{
    if (alphas.empty())
        throw DomainError("product expectation needs at least one factor");
    if (alphas.size() == 1)
        return stratonovich_expectation(alphas[0], h);
    double sum = 0.0;
    for (const auto& [beta, count] : lambda_multi(alphas))
        sum += static_cast<double>(count) * stratonovich_expectation(beta, h);
    return sum;
}

namespace {

double index_weight(const MultiIndex& a)
{
    return 0.5 * static_cast<double>(a.length() + a.zero_count());
}

double joint_constant(std::vector<MultiIndex> f, std::map<std::vector<MultiIndex>, double>& memo)
{
    std::erase_if(f, [](const MultiIndex& a) { return a.empty(); });
    if (f.empty())
        return 1.0;
    std::sort(f.begin(), f.end());
    if (auto it = memo.find(f); it != memo.end())
        return it->second;
    double w = 0.0;
    std::map<int, int> parity;
    for (const auto& a : f) {
        w += index_weight(a);
        for (int e : a.entries())
            if (e != 0)
                ++parity[e];
    }
    double c = 0.0;
    const bool odd = std::any_of(parity.begin(), parity.end(), [](const auto& kv) { return kv.second % 2 != 0; });
    if (!odd) {
        // d(prod J) = sum_i (prod_{j != i} J_j) J_{alpha_i-} o dW_{last(alpha_i)}; the
        // Stratonovich correction of a dW_r integral pairs it with every factor
        // ending in r.
        for (std::size_t i = 0; i < f.size(); ++i) {
            std::vector<MultiIndex> y = f;
            const int r = y[i].back();
            y[i] = y[i].drop_last();
            if (r == 0) {
                c += joint_constant(y, memo);
                continue;
            }
            for (std::size_t j = 0; j < y.size(); ++j) {
                if (y[j].empty() || y[j].back() != r)
                    continue;
                std::vector<MultiIndex> z = y;
                z[j] = z[j].drop_last();
                c += 0.5 * joint_constant(std::move(z), memo);
            }
        }
        c /= w;
    }
    memo.emplace(std::move(f), c);
    return c;
}

} // namespace

std::pair<double, double> joint_moment(std::vector<MultiIndex> factors)
{
    thread_local std::map<std::vector<MultiIndex>, double> memo;
    double w = 0.0;
    for (const auto& a : factors)
        w += index_weight(a);
    return {joint_constant(std::move(factors), memo), w};
}

} // namespace stochsym
