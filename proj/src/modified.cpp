#include "stochsym/modified.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stochsym/errors.hpp"
#include "stochsym/integrator.hpp"

namespace stochsym {

std::string noise_class_name(NoiseClass c)
{
    switch (c) {
    case NoiseClass::Additive:
        return "additive";
    case NoiseClass::HalfMultiplicative:
        return "half-multiplicative";
    case NoiseClass::FullyMultiplicative:
        return "fully multiplicative";
    }
    return "unknown";
}

namespace {

bool depends_on_kind(const HamiltonianSystem& sys, const Expr& e, PhaseVar::Kind kind)
{
    for (int k = 1; k <= sys.d; ++k)
        if (!is_zero(diff(e, PhaseVar{kind, k})))
            return true;
    return false;
}

} // namespace

NoiseClass classify_noise(const HamiltonianSystem& sys)
{
    bool additive = true;
    bool half = true;
    for (int r = 1; r <= sys.m; ++r) {
        const Expr& h = sys.H(r);
        const bool on_p = depends_on_kind(sys, h, PhaseVar::Kind::P);
        const bool on_q = depends_on_kind(sys, h, PhaseVar::Kind::Q);
        if (on_p && on_q)
            half = false;
        for (int k = 1; k <= sys.d && additive; ++k)
            for (PhaseVar v : {momentum(k), position(k)}) {
                const Expr g = diff(h, v);
                if (depends_on(g, PhaseVar::Kind::P) || depends_on(g, PhaseVar::Kind::Q) ||
                    !free_symbols(g).abstracts.empty()) {
                    additive = false;
                    break;
                }
            }
    }
    if (additive)
        return NoiseClass::Additive;
    return half ? NoiseClass::HalfMultiplicative : NoiseClass::FullyMultiplicative;
}

int ModifiedSystem::order() const
{
    std::size_t n = 0;
    for (const auto& c : corrections)
        n = std::max(n, c.size());
    return static_cast<int>(n);
}

const Expr& ModifiedSystem::correction(int j, int i) const
{
    if (j < 0 || j > base.m || i < 1)
        throw DomainError("no correction H_" + std::to_string(j) + "^[" + std::to_string(i) + "]");
    const auto& c = corrections.at(static_cast<std::size_t>(j));
    if (static_cast<std::size_t>(i) > c.size())
        throw DomainError("correction order " + std::to_string(i) + " not populated");
    return c[static_cast<std::size_t>(i - 1)];
}

ModifiedSystem first_order_modified(const HamiltonianSystem& sys)
{
    sys.validate();
    const NoiseClass cls = classify_noise(sys);
    if (cls == NoiseClass::FullyMultiplicative)
        throw UnsupportedSystem(
            "fully multiplicative noise: some H_r depends on both p and q (e.g. the Kubo oscillator), so no "
            "modified equation of weak order 2 exists with deterministic drift and diffusion perturbations");
    for (int r = 1; r <= sys.m; ++r)
        if (depends_on_kind(sys, sys.H(r), PhaseVar::Kind::P))
            throw UnsupportedSystem("noise class " + noise_class_name(cls) + ": H_" + std::to_string(r) +
                                    " depends on p; the first-order correction needs q-only noise Hamiltonians");
    for (int i = 1; i <= sys.d; ++i)
        for (int k = 1; k <= sys.d; ++k)
            if (!is_zero(diff(diff(sys.H(0), momentum(i)), position(k))))
                throw UnsupportedSystem("H_0 is not separable as T(p) + V(q)");

    ModifiedSystem out;
    out.base = sys;
    for (int j = 0; j <= sys.m; ++j) {
        std::vector<Expr> terms;
        for (int k = 1; k <= sys.d; ++k)
            terms.push_back(diff(sys.H(0), momentum(k)) * diff(sys.H(j), position(k)));
        out.corrections.push_back({simplify(Expr(-0.5) * Expr::nary(NodeKind::Add, std::move(terms)))});
    }
    return out;
}

ModifiedSystem abstract_corrections(const HamiltonianSystem& sys)
{
    ModifiedSystem out;
    out.base = sys;
    for (int j = 0; j <= sys.m; ++j)
        out.corrections.push_back({Expr::abstract("H" + std::to_string(j) + "_1")});
    return out;
}

ModifiedSystem zero_corrections(const HamiltonianSystem& sys)
{
    ModifiedSystem out;
    out.base = sys;
    out.corrections.assign(static_cast<std::size_t>(sys.m) + 1, std::vector<Expr>{Expr(0.0)});
    return out;
}

std::vector<Expr> modified_hamiltonians(const ModifiedSystem& msys)
{
    const Expr h = Expr::param("h");
    std::vector<Expr> out;
    for (int j = 0; j <= msys.base.m; ++j) {
        std::vector<Expr> terms{msys.base.H(j)};
        const auto& c = msys.corrections.at(static_cast<std::size_t>(j));
        for (std::size_t i = 0; i < c.size(); ++i)
            terms.push_back(Expr::power(h, static_cast<int>(i) + 1) * c[i]);
        out.push_back(simplify(Expr::nary(NodeKind::Add, std::move(terms))));
    }
    return out;
}

HamiltonianSystem modified_sde(const ModifiedSystem& msys, double h)
{
    if (!(h >= 0.0) || !std::isfinite(h))
        throw DomainError("modified_sde needs h >= 0, got " + std::to_string(h));
    if (h == 0.0)
        return msys.base;
    std::map<std::string, Expr, std::less<>> bind{{"h", Expr(h)}};
    std::vector<Expr> hams;
    for (const auto& e : modified_hamiltonians(msys))
        hams.push_back(simplify(substitute(e, bind)));
    HamiltonianSystem out = msys.base;
    out.hamiltonians = std::move(hams);
    out.name = msys.base.name + "-modified";
    return out;
}

std::vector<std::string> render_sde(const HamiltonianSystem& sys)
{
    const std::vector<Expr> f = stratonovich_fields(sys);
    const std::size_t n = 2 * static_cast<std::size_t>(sys.d);
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < n; ++i) {
        const int k = static_cast<int>(i % static_cast<std::size_t>(sys.d)) + 1;
        const PhaseVar v = i < n / 2 ? momentum(k) : position(k);
        std::string line = "d" + phase_var_name(v) + " = (" + to_string(f[i]) + ") dt";
        for (int r = 1; r <= sys.m; ++r) {
            const Expr& g = f[static_cast<std::size_t>(r) * n + i];
            if (g.is_constant(0.0))
                continue;
            line += " + (" + to_string(g) + ") o dW" + std::to_string(r);
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

// ---------------------------------------------------------------------------

const Expr& GbarSeries::coefficient(const MultiIndex& beta) const
{
    auto it = terms.find(beta);
    if (it == terms.end())
        throw DomainError("Gbar has no index " + beta.str());
    return it->second;
}

GbarSeries gbar_series(const ModifiedSystem& msys, std::size_t max_len)
{
    if (max_len < 1)
        throw DomainError("max_len must be >= 1");
    if (max_len > kMaxSeriesLength)
        throw CapExceeded("max_len " + std::to_string(max_len) + " exceeds cap " + std::to_string(kMaxSeriesLength));
    const HamiltonianSystem& sys = msys.base;
    if (msys.corrections.size() != static_cast<std::size_t>(sys.m) + 1)
        throw DomainError("corrections must cover H_0..H_m");

    // G^{[k]} is needed up to k = max_len - 1; products of corrections fill
    // the higher slots even when only first-order corrections are given.
    const std::size_t order = max_len - 1;
    std::vector<std::vector<Expr>> hams;
    for (int j = 0; j <= sys.m; ++j) {
        std::vector<Expr> s{sys.H(j)};
        for (const auto& c : msys.corrections[static_cast<std::size_t>(j)])
            s.push_back(c);
        s.resize(std::max(s.size(), order + 1), Expr(0.0));
        s.resize(order + 1);
        hams.push_back(std::move(s));
    }
    CoefficientRecursion rec(sys.d, std::move(hams));

    GbarSeries out;
    out.max_len = max_len;
    std::map<MultiIndex, std::vector<std::vector<Expr>>, GradedLess> acc;
    for (const auto& beta : all_indices(sys.m, max_len))
        acc[beta].resize(beta.length());
    double fact = 1.0;
    for (std::size_t k = 0; k < max_len; ++k) {
        if (k > 0)
            fact *= static_cast<double>(k);
        for (const auto& alpha : all_indices(sys.m, max_len - k)) {
            const Expr& g = rec.coefficient(alpha).at(k);
            if (g.is_constant(0.0))
                continue;
            if (k == 0) {
                acc[alpha][0].push_back(g);
                continue;
            }
            for (const auto& [beta, mult] : lambda_pair(MultiIndex::zeros(static_cast<int>(k), sys.m), alpha))
                acc[beta][k].push_back(Expr(fact * static_cast<double>(mult)) * g);
        }
    }
    for (auto& [beta, by_k] : acc) {
        std::vector<Expr> parts;
        std::vector<Expr> all;
        for (auto& terms : by_k) {
            Expr part = simplify(Expr::nary(NodeKind::Add, terms));
            all.push_back(part);
            parts.push_back(std::move(part));
        }
        out.terms.emplace(beta, simplify(Expr::nary(NodeKind::Add, std::move(all))));
        out.parts.emplace(beta, std::move(parts));
    }
    return out;
}

JSeries scheme_j_series(const GenFunSeries& s)
{
    std::map<MultiIndex, std::vector<Expr>, GradedLess> acc;
    for (const auto& [gamma, term] : s.terms) {
        if (term.zero)
            continue;
        if (s.basis == Basis::Stratonovich) {
            acc[gamma].push_back(term.coefficient);
            continue;
        }
        for (const auto& [beta, c] : ito_to_stratonovich(gamma))
            acc[beta].push_back(c == 1.0 ? term.coefficient : Expr(c) * term.coefficient);
    }
    JSeries out;
    for (auto& [beta, terms] : acc) {
        Expr c = simplify(Expr::nary(NodeKind::Add, std::move(terms)));
        if (!is_zero(c))
            out.emplace(beta, std::move(c));
    }
    return out;
}

JSeries gbar_j_series(const GbarSeries& g)
{
    JSeries out;
    for (const auto& [beta, c] : g.terms)
        if (!is_zero(c))
            out.emplace(beta, c);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double index_weight(const MultiIndex& a)
{
    return 0.5 * static_cast<double>(a.length() + a.zero_count());
}

/// Gradient coefficients of a J series: for each of the 2d variables
/// (S_q1..S_qd, S_P1..S_Pd) the list of (beta, dC_beta) evaluated at a point.
class GradientTable {
public:
    GradientTable(const JSeries& s, const HamiltonianSystem& sys) : d_(sys.d)
    {
        std::vector<Expr> outs;
        for (const auto& [beta, c] : s) {
            betas_.push_back(beta);
            for (int k = 1; k <= d_; ++k)
                outs.push_back(diff(c, position(k)));
            for (int k = 1; k <= d_; ++k)
                outs.push_back(diff(c, momentum(k)));
        }
        prog_ = Program::compile(outs, d_, sys.parameters);
    }

    struct Entry {
        MultiIndex beta;
        double c;
        double w;
    };

    /// point = (P1..Pd, q1..qd); returns per variable the nonzero entries.
    std::vector<std::vector<Entry>> at(const std::vector<double>& point) const
    {
        const std::size_t nv = 2 * static_cast<std::size_t>(d_);
        std::vector<double> vals(prog_.outputs());
        prog_.run(point, vals);
        std::vector<std::vector<Entry>> out(nv);
        for (std::size_t b = 0; b < betas_.size(); ++b)
            for (std::size_t v = 0; v < nv; ++v) {
                const double c = vals[b * nv + v];
                if (c != 0.0)
                    out[v].push_back({betas_[b], c, index_weight(betas_[b])});
            }
        return out;
    }

    const std::vector<MultiIndex>& betas() const { return betas_; }
    int d() const { return d_; }

private:
    int d_;
    std::vector<MultiIndex> betas_;
    Program prog_;
};

/// E[prod_v X_v^{e_v}] as a map 2w -> coefficient of h^w, keeping total
/// weight <= max_weight. Each X_v is a linear combination of J_beta.
std::map<int, double> pair_polynomial(const std::vector<std::vector<GradientTable::Entry>>& vars,
                                      const std::vector<int>& powers, double max_weight)
{
    std::map<int, double> out;
    std::vector<MultiIndex> factors;
    std::vector<std::size_t> slot_var;
    for (std::size_t v = 0; v < powers.size(); ++v)
        for (int i = 0; i < powers[v]; ++i)
            slot_var.push_back(v);
    const std::size_t n = slot_var.size();
    std::vector<std::size_t> choice(n);

    // Nondecreasing choices within each variable's group, weighted by the
    // multinomial count of distinct orderings.
    auto recurse = [&](auto&& self, std::size_t slot, double coef, double weight, double mult) -> void {
        if (slot == n) {
            const auto [c, w] = joint_moment(factors);
            if (c != 0.0)
                out[static_cast<int>(std::lround(2 * w))] += mult * coef * c;
            return;
        }
        const std::size_t v = slot_var[slot];
        const bool same_group = slot > 0 && slot_var[slot - 1] == v;
        const std::size_t start = same_group ? choice[slot - 1] : 0;
        // run length of the previous choice inside this group
        std::size_t run = 0;
        if (same_group)
            for (std::size_t s = slot; s-- > 0 && slot_var[s] == v && choice[s] == choice[slot - 1];)
                ++run;
        const std::size_t group_pos = [&] {
            std::size_t p = 0;
            for (std::size_t s = slot; s-- > 0 && slot_var[s] == v;)
                ++p;
            return p;
        }();
        const auto& entries = vars[v];
        for (std::size_t e = start; e < entries.size(); ++e) {
            const double w = weight + entries[e].w;
            // every later slot adds at least 1/2
            if (w + 0.5 * static_cast<double>(n - slot - 1) > max_weight + 1e-9)
                continue;
            choice[slot] = e;
            // multinomial update: (group_pos+1) / (run length of e)
            const double r = (same_group && e == choice[slot - 1]) ? static_cast<double>(run + 1) : 1.0;
            const double m = mult * static_cast<double>(group_pos + 1) / r;
            factors.push_back(entries[e].beta);
            self(self, slot + 1, coef * entries[e].c, w, m);
            factors.pop_back();
        }
    };
    recurse(recurse, 0, 1.0, 0.0, 1.0);
    return out;
}

std::string pair_name(const std::vector<int>& qp, const std::vector<int>& pp)
{
    std::string out;
    auto add = [&](const std::string& base, int k, int e) {
        if (e == 0)
            return;
        if (!out.empty())
            out += '*';
        out += base + (qp.size() > 1 ? std::to_string(k) : "");
        if (e > 1)
            out += '^' + std::to_string(e);
    };
    for (std::size_t k = 0; k < qp.size(); ++k)
        add("S_q", static_cast<int>(k) + 1, qp[k]);
    for (std::size_t k = 0; k < pp.size(); ++k)
        add("S_P", static_cast<int>(k) + 1, pp[k]);
    return out;
}

/// Exponent vectors over 2d variables with total degree 1..max_degree; q
/// exponents first, higher q powers earlier within a degree.
std::vector<std::vector<int>> monomials(std::size_t nv, int max_degree)
{
    std::vector<std::vector<int>> out;
    for (int deg = 1; deg <= max_degree; ++deg) {
        std::vector<int> e(nv, 0);
        auto rec = [&](auto&& self, std::size_t v, int left) -> void {
            if (v + 1 == nv) {
                e[v] = left;
                out.push_back(e);
                return;
            }
            for (int x = left; x >= 0; --x) {
                e[v] = x;
                self(self, v + 1, left - x);
            }
        };
        rec(rec, 0, deg);
    }
    return out;
}

double fit_slope(const std::vector<double>& hs, const std::vector<double>& ys)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const double x = std::log(hs[i]);
        const double y = std::log(ys[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

std::pair<double, double> matching_pair_exact(const JSeries& scheme, const JSeries& modified,
                                              const HamiltonianSystem& sys, const std::vector<double>& point,
                                              const std::vector<int>& q_powers, const std::vector<int>& p_powers,
                                              double h, double max_weight)
{
    GradientTable a(scheme, sys);
    GradientTable b(modified, sys);
    std::vector<int> powers(q_powers);
    powers.insert(powers.end(), p_powers.begin(), p_powers.end());
    auto eval = [&](const GradientTable& t) {
        double s = 0.0;
        for (const auto& [w2, c] : pair_polynomial(t.at(point), powers, max_weight))
            s += c * std::pow(h, 0.5 * w2);
        return s;
    };
    return {eval(a), eval(b)};
}

MatchingReport matching_residuals(const JSeries& scheme, const JSeries& modified, const HamiltonianSystem& sys,
                                  int k, const std::vector<double>& hs, std::size_t points, RngStream& rng)
{
    if (k != 1 && k != 2)
        throw DomainError("matching order k must be 1 or 2");
    if (hs.size() < 2)
        throw DomainError("matching needs at least two step sizes");
    for (double h : hs)
        if (!(h > 0.0))
            throw DomainError("step sizes must be positive");
    if (points < 1)
        throw DomainError("matching needs at least one phase point");

    MatchingReport rep;
    rep.k = k;
    rep.hs = hs;
    rep.points = points;
    rep.verified_dimension = sys.d == 1;
    const std::size_t nv = 2 * static_cast<std::size_t>(sys.d);
    const double max_weight = k + 1;
    GradientTable ta(scheme, sys);
    GradientTable tb(modified, sys);

    const auto monos = monomials(nv, 2 * k);
    for (const auto& e : monos) {
        PairResidual pr;
        pr.q_powers.assign(e.begin(), e.begin() + sys.d);
        pr.p_powers.assign(e.begin() + sys.d, e.end());
        pr.name = pair_name(pr.q_powers, pr.p_powers);
        pr.residual.assign(hs.size(), 0.0);
        pr.coefficient_gap.assign(static_cast<std::size_t>(k) + 1, 0.0);
        rep.pairs.push_back(std::move(pr));
    }
    std::vector<double> scale(hs.size(), 0.0);
    std::vector<std::vector<double>> scales(monos.size(), scale);

    // Phase points are (P1..Pd, q1..qd) in [-1,1].
    for (std::size_t pt = 0; pt < points; ++pt) {
        std::vector<double> x(nv);
        for (auto& v : x)
            v = 2.0 * rng.uniform() - 1.0;
        const auto va = ta.at(x);
        const auto vb = tb.at(x);
        for (std::size_t i = 0; i < monos.size(); ++i) {
            // powers are ordered (q..., P...) while table variables are (S_q..., S_P...)
            const auto pa = pair_polynomial(va, monos[i], max_weight);
            const auto pb = pair_polynomial(vb, monos[i], max_weight);
            std::map<int, double> gap;
            for (const auto& [w2, c] : pa)
                gap[w2] += c;
            for (const auto& [w2, c] : pb)
                gap[w2] -= c;
            auto& pr = rep.pairs[i];
            for (const auto& [w2, g] : gap)
                if (w2 % 2 == 0 && w2 / 2 >= 1 && w2 / 2 <= k + 1)
                    pr.coefficient_gap[static_cast<std::size_t>(w2 / 2 - 1)] =
                        std::max(pr.coefficient_gap[static_cast<std::size_t>(w2 / 2 - 1)], std::abs(g));
            for (std::size_t hi = 0; hi < hs.size(); ++hi) {
                double r = 0.0;
                double s = 0.0;
                for (const auto& [w2, g] : gap)
                    r += g * std::pow(hs[hi], 0.5 * w2);
                for (const auto& [w2, c] : pa)
                    s += std::abs(c) * std::pow(hs[hi], 0.5 * w2);
                pr.residual[hi] = std::max(pr.residual[hi], std::abs(r));
                scales[i][hi] = std::max(scales[i][hi], s);
            }
        }
    }

    rep.min_slope = std::numeric_limits<double>::infinity();
    rep.passed = true;
    for (std::size_t i = 0; i < rep.pairs.size(); ++i) {
        auto& pr = rep.pairs[i];
        pr.below_floor = true;
        for (std::size_t hi = 0; hi < hs.size(); ++hi)
            if (pr.residual[hi] > kMatchingFloor * (1.0 + scales[i][hi]))
                pr.below_floor = false;
        if (pr.below_floor) {
            pr.slope = std::numeric_limits<double>::infinity();
            continue;
        }
        const bool any_zero = std::any_of(pr.residual.begin(), pr.residual.end(), [](double r) { return r <= 0; });
        pr.slope = any_zero ? 0.0 : fit_slope(hs, pr.residual);
        rep.min_slope = std::min(rep.min_slope, pr.slope);
        if (pr.slope < k + 0.5)
            rep.passed = false;
    }
    return rep;
}

MatchingReport matching_residuals(const HamiltonianSystem& sys, const ModifiedSystem& msys, int k,
                                  const std::vector<double>& hs, std::size_t points, RngStream& rng)
{
    const JSeries scheme = scheme_j_series(to_ito_truncation(series(sys, 2), 1));
    const JSeries modified = gbar_j_series(gbar_series(msys, kMaxSeriesLength));
    return matching_residuals(scheme, modified, sys, k, hs, points, rng);
}

PairEstimate matching_pair_mc(const JSeries& scheme, const JSeries& modified, const HamiltonianSystem& sys,
                              const std::vector<double>& point, const std::vector<int>& q_powers,
                              const std::vector<int>& p_powers, double h, int substeps, std::int64_t samples,
                              RngStream& rng)
{
    if (samples < 2)
        throw DomainError("need at least 2 samples");
    GradientTable ta(scheme, sys);
    GradientTable tb(modified, sys);
    const auto va = ta.at(point);
    const auto vb = tb.at(point);
    std::vector<MultiIndex> needed;
    for (const auto* t : {&va, &vb})
        for (const auto& var : *t)
            for (const auto& e : var)
                needed.push_back(e.beta);
    if (needed.empty())
        return {};
    std::size_t nodes = needed.size() * 4;
    if (static_cast<double>(substeps) * static_cast<double>(samples) * static_cast<double>(nodes) > kOracleWorkCap)
        throw CapExceeded("matching Monte Carlo work exceeds cap");
    IntegralPath path(sys.m, needed);
    std::vector<int> powers(q_powers);
    powers.insert(powers.end(), p_powers.begin(), p_powers.end());
    RunningStats sa, sb, sd;
    auto value = [&](const std::vector<std::vector<GradientTable::Entry>>& vars) {
        double prod = 1.0;
        for (std::size_t v = 0; v < vars.size(); ++v) {
            if (powers[v] == 0)
                continue;
            double x = 0.0;
            for (const auto& e : vars[v])
                x += e.c * path.J(e.beta);
            prod *= std::pow(x, powers[v]);
        }
        return prod;
    };
    for (std::int64_t s = 0; s < samples; ++s) {
        path.simulate(h, substeps, rng);
        const double a = value(va);
        const double b = value(vb);
        sa.add(a);
        sb.add(b);
        sd.add(a - b);
    }
    auto est = [](const RunningStats& r) { return MomentEstimate{r.mean(), r.stderr_of_mean(), r.count()}; };
    return {est(sa), est(sb), est(sd)};
}

} // namespace stochsym
