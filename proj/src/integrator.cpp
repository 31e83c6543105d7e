#include "stochsym/integrator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "stochsym/errors.hpp"

namespace stochsym {

std::vector<double> PhasePoint::flat() const
{
    std::vector<double> x(p);
    x.insert(x.end(), q.begin(), q.end());
    return x;
}

PhasePoint PhasePoint::from_flat(std::span<const double> x)
{
    const std::size_t d = x.size() / 2;
    return {std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d)),
            std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(d), x.end())};
}

namespace {

double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    return m;
}

void check_finite(std::span<const double> x)
{
    for (double v : x)
        if (!std::isfinite(v))
            throw NumericError("non-finite state encountered during step");
}

// Solves A x = b in place (A row-major n x n) by Gaussian elimination with
// partial pivoting; returns false if singular.
bool solve_linear(std::span<double> a, std::span<double> b, std::size_t n)
{
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col]))
                piv = r;
        if (a[piv * n + col] == 0.0)
            return false;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (std::size_t c = col; c < n; ++c)
                a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c)
            s -= a[i * n + c] * b[c];
        b[i] = s / a[i * n + i];
    }
    return true;
}

} // namespace

// ---------------------------------------------------------------------------

SchemeMap::SchemeMap(const GenFunSeries& s, SolverOptions options) : d_(s.system.d), options_(options)
{
    if (s.basis != Basis::Ito)
        throw DomainError("a scheme map needs an Ito-basis series");
    std::vector<MultiIndex> gammas;
    std::vector<Expr> dq_out;
    std::vector<Expr> dp_out;
    for (const auto& [gamma, term] : s.terms) {
        if (term.zero)
            continue;
        SchemeTerm t{gamma, {}, {}};
        bool any = false;
        for (int k = 1; k <= d_; ++k) {
            t.dq.push_back(diff(term.coefficient, position(k)));
            t.dp.push_back(diff(term.coefficient, momentum(k)));
            any = any || !t.dq.back().is_constant(0.0) || !t.dp.back().is_constant(0.0);
        }
        if (!any)
            continue;
        for (const auto& e : t.dq) {
            dq_out.push_back(e);
            if (depends_on(e, PhaseVar::Kind::P))
                explicit_ = false;
        }
        dp_out.insert(dp_out.end(), t.dp.begin(), t.dp.end());
        gammas.push_back(gamma);
        terms_.push_back(std::move(t));
    }
    plan_ = NoisePlan(s.system.m, gammas);
    dq_prog_ = Program::compile(dq_out, d_, s.system.parameters);
    dp_prog_ = Program::compile(dp_out, d_, s.system.parameters);
}

std::size_t SchemeMap::workspace_size() const noexcept
{
    const std::size_t d = static_cast<std::size_t>(d_);
    const std::size_t regs = std::max(dq_prog_.registers(), dp_prog_.registers());
    return regs + terms_.size() * d + 8 * d + d * d;
}

void SchemeMap::grad_q(std::span<const double> pq, std::span<const double> noise, std::span<double> out,
                       std::span<double> ws) const
{
    const std::size_t d = static_cast<std::size_t>(d_);
    const std::size_t regs = std::max(dq_prog_.registers(), dp_prog_.registers());
    std::span<double> vals = ws.subspan(regs, terms_.size() * d);
    dq_prog_.run(pq, vals, ws.first(regs));
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t t = 0; t < terms_.size(); ++t)
        for (std::size_t k = 0; k < d; ++k)
            out[k] += vals[t * d + k] * noise[t];
}

void SchemeMap::advance(std::span<double> x, std::span<const double> noise, std::span<double> ws,
                        StepStats& stats) const
{
    const std::size_t d = static_cast<std::size_t>(d_);
    const std::size_t regs = std::max(dq_prog_.registers(), dp_prog_.registers());
    std::span<double> scratch = ws.subspan(regs + terms_.size() * d);
    std::span<double> pq = scratch.subspan(0, 2 * d);
    std::span<double> g = scratch.subspan(2 * d, d);
    std::span<double> r = scratch.subspan(3 * d, d);
    std::span<double> r2 = scratch.subspan(4 * d, d);
    std::span<double> p_old = scratch.subspan(5 * d, d);
    std::span<double> jac = scratch.subspan(8 * d, d * d);

    std::copy(x.begin(), x.end(), pq.begin());
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d), p_old.begin());
    stats = StepStats{};

    if (explicit_) {
        grad_q(pq, noise, g, ws);
        for (std::size_t k = 0; k < d; ++k)
            pq[k] = p_old[k] - g[k];
    } else {
        const double scale = 1.0 + max_abs(p_old);
        auto residual = [&](std::span<double> out) {
            grad_q(pq, noise, g, ws);
            for (std::size_t k = 0; k < d; ++k)
                out[k] = pq[k] - p_old[k] + g[k];
            return max_abs(out);
        };
        bool converged = false;
        double res = 0.0;
        for (int it = 0; it <= options_.fixed_point_iterations; ++it) {
            res = residual(r);
            if (!std::isfinite(res))
                break;
            if (res <= options_.tolerance * scale) {
                converged = true;
                break;
            }
            if (it == options_.fixed_point_iterations)
                break;
            for (std::size_t k = 0; k < d; ++k)
                pq[k] = p_old[k] - g[k];
            ++stats.iterations;
        }
        if (!converged) {
            std::copy(p_old.begin(), p_old.end(), pq.begin());
            stats.used_newton = true;
            for (int it = 0; it < options_.newton_iterations; ++it) {
                res = residual(r);
                if (res <= options_.tolerance * scale) {
                    converged = true;
                    break;
                }
                for (std::size_t l = 0; l < d; ++l) {
                    const double saved = pq[l];
                    const double eps = 1e-7 * (1.0 + std::abs(saved));
                    pq[l] = saved + eps;
                    residual(r2);
                    pq[l] = saved;
                    for (std::size_t k = 0; k < d; ++k)
                        jac[k * d + l] = (r2[k] - r[k]) / eps;
                }
                for (std::size_t k = 0; k < d; ++k)
                    r[k] = -r[k];
                if (!solve_linear(jac, r, d))
                    break;
                for (std::size_t k = 0; k < d; ++k)
                    pq[k] += r[k];
                ++stats.iterations;
            }
        }
        stats.residual = res;
        if (!converged)
            throw NumericError("implicit solve did not converge, residual " + std::to_string(res));
    }

    // Q = q + dS/dP(P, q)
    std::span<double> vals = ws.subspan(regs, terms_.size() * d);
    dp_prog_.run(pq, vals, ws.first(regs));
    for (std::size_t k = 0; k < d; ++k) {
        double dq = 0.0;
        for (std::size_t t = 0; t < terms_.size(); ++t)
            dq += vals[t * d + k] * noise[t];
        x[k] = pq[k];
        x[d + k] = pq[d + k] + dq;
    }
    check_finite(x);
}

// ---------------------------------------------------------------------------

std::vector<Expr> stratonovich_fields(const HamiltonianSystem& sys)
{
    std::vector<Expr> out;
    for (const auto& h : sys.hamiltonians) {
        for (int k = 1; k <= sys.d; ++k)
            out.push_back(simplify(-diff(h, position(k))));
        for (int k = 1; k <= sys.d; ++k)
            out.push_back(diff(h, momentum(k)));
    }
    return out;
}

namespace {

std::vector<MultiIndex> increment_plan(int m)
{
    std::vector<MultiIndex> out;
    for (int r = 0; r <= m; ++r)
        out.push_back(MultiIndex({r}, m));
    return out;
}

PhaseVar coordinate(int i, int d)
{
    return i < d ? momentum(i + 1) : position(i - d + 1);
}

} // namespace

MidpointSde::MidpointSde(const HamiltonianSystem& sys)
    : d_(sys.d), m_(sys.m), plan_(sys.m, increment_plan(sys.m))
{
    sys.validate();
    field_ = Program::compile(stratonovich_fields(sys), d_, sys.parameters);
}

std::size_t MidpointSde::workspace_size() const noexcept
{
    return field_.registers() + field_.outputs() + 4 * static_cast<std::size_t>(d_);
}

void MidpointSde::advance(std::span<double> x, std::span<const double> noise, std::span<double> ws,
                          StepStats& stats) const
{
    const std::size_t n = 2 * static_cast<std::size_t>(d_);
    const std::size_t regs = field_.registers();
    std::span<double> vals = ws.subspan(regs, field_.outputs());
    std::span<double> mid = ws.subspan(regs + field_.outputs(), n);
    stats = StepStats{};
    auto increment = [&](std::size_t i) {
        double s = 0.0;
        for (int r = 0; r <= m_; ++r)
            s += vals[static_cast<std::size_t>(r) * n + i] * noise[static_cast<std::size_t>(r)];
        return s;
    };
    field_.run(x, vals, ws.first(regs));
    for (std::size_t i = 0; i < n; ++i)
        mid[i] = x[i] + 0.5 * increment(i);
    field_.run(mid, vals, ws.first(regs));
    for (std::size_t i = 0; i < n; ++i)
        x[i] += increment(i);
    check_finite(x);
}

EulerMaruyama::EulerMaruyama(const HamiltonianSystem& sys)
    : d_(sys.d), m_(sys.m), plan_(sys.m, increment_plan(sys.m))
{
    sys.validate();
    const std::vector<Expr> f = stratonovich_fields(sys);
    const int n = 2 * d_;
    std::vector<Expr> out(f.begin(), f.begin() + n);
    for (int r = 1; r <= m_; ++r) {
        for (int i = 0; i < n; ++i) {
            std::vector<Expr> terms{out[static_cast<std::size_t>(i)]};
            const Expr& gi = f[static_cast<std::size_t>(r * n + i)];
            for (int k = 0; k < n; ++k) {
                const Expr& gk = f[static_cast<std::size_t>(r * n + k)];
                if (gk.is_constant(0.0))
                    continue;
                terms.push_back(Expr(0.5) * gk * diff(gi, coordinate(k, d_)));
            }
            out[static_cast<std::size_t>(i)] = simplify(Expr::nary(NodeKind::Add, std::move(terms)));
        }
    }
    out.insert(out.end(), f.begin() + n, f.end());
    field_ = Program::compile(out, d_, sys.parameters);
}

std::size_t EulerMaruyama::workspace_size() const noexcept
{
    return field_.registers() + field_.outputs();
}

void EulerMaruyama::advance(std::span<double> x, std::span<const double> noise, std::span<double> ws,
                            StepStats& stats) const
{
    const std::size_t n = 2 * static_cast<std::size_t>(d_);
    const std::size_t regs = field_.registers();
    std::span<double> vals = ws.subspan(regs, field_.outputs());
    stats = StepStats{};
    field_.run(x, vals, ws.first(regs));
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int r = 0; r <= m_; ++r)
            s += vals[static_cast<std::size_t>(r) * n + i] * noise[static_cast<std::size_t>(r)];
        x[i] += s;
    }
    check_finite(x);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> aligned_noise(const OneStepMethod& method, const NoiseSample& w)
{
    std::vector<double> out;
    for (const auto& idx : method.plan().indices())
        out.push_back(w.value(idx));
    return out;
}

void check_point(const OneStepMethod& method, const PhasePoint& x)
{
    if (x.p.size() != static_cast<std::size_t>(method.d()) || x.q.size() != static_cast<std::size_t>(method.d()))
        throw DomainError("phase point dimension does not match the method");
}

} // namespace

PhasePoint step(const OneStepMethod& method, const PhasePoint& x, const NoiseSample& w, StepStats* stats)
{
    check_point(method, x);
    const std::vector<double> noise = aligned_noise(method, w);
    std::vector<double> state = x.flat();
    std::vector<double> ws(method.workspace_size());
    StepStats local;
    method.advance(state, noise, ws, local);
    if (stats)
        *stats = local;
    return PhasePoint::from_flat(state);
}

std::vector<PhasePoint> simulate(const OneStepMethod& method, const PhasePoint& x0, double h, int n_steps,
                                 RngStream& rng, NoiseMode mode)
{
    if (n_steps < 1)
        throw DomainError("simulate needs n_steps >= 1");
    if (!(h > 0.0))
        throw DomainError("step size must be positive");
    check_point(method, x0);
    std::vector<PhasePoint> path{x0};
    std::vector<double> state = x0.flat();
    std::vector<double> ws(method.workspace_size());
    std::vector<double> noise(method.plan().indices().size());
    std::vector<double> dw(static_cast<std::size_t>(method.plan().m()));
    StepStats stats;
    for (int n = 0; n < n_steps; ++n) {
        method.plan().draw(h, mode, rng, dw, noise);
        method.advance(state, noise, ws, stats);
        path.push_back(PhasePoint::from_flat(state));
    }
    return path;
}

namespace {

void append_number(std::string& out, double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.append(buf, ptr);
}

} // namespace

void write_path_csv(std::ostream& os, const std::vector<PhasePoint>& path, double h)
{
    if (path.empty())
        return;
    const std::size_t d = path.front().p.size();
    std::string line = "step,time";
    for (std::size_t k = 1; k <= d; ++k)
        line += ",p" + std::to_string(k);
    for (std::size_t k = 1; k <= d; ++k)
        line += ",q" + std::to_string(k);
    os << line << '\n';
    for (std::size_t n = 0; n < path.size(); ++n) {
        line = std::to_string(n) + ",";
        append_number(line, static_cast<double>(n) * h);
        for (double v : path[n].p) {
            line += ',';
            append_number(line, v);
        }
        for (double v : path[n].q) {
            line += ',';
            append_number(line, v);
        }
        os << line << '\n';
    }
}

double symplecticity_defect(const OneStepMethod& method, const PhasePoint& x, const NoiseSample& w)
{
    check_point(method, x);
    const std::vector<double> noise = aligned_noise(method, w);
    const std::size_t n = 2 * static_cast<std::size_t>(method.d());
    const std::size_t d = n / 2;
    std::vector<double> ws(method.workspace_size());
    std::vector<double> m(n * n); // m[i*n + j] = d out_i / d in_j
    const double eps = 1e-6;
    StepStats stats;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> plus = x.flat();
        std::vector<double> minus = plus;
        plus[j] += eps;
        minus[j] -= eps;
        method.advance(plus, noise, ws, stats);
        method.advance(minus, noise, ws, stats);
        for (std::size_t i = 0; i < n; ++i)
            m[i * n + j] = (plus[i] - minus[i]) / (2 * eps);
    }
    // J = [[0, I], [-I, 0]] on (p, q).
    auto jmat = [d](std::size_t i, std::size_t j) {
        if (i < d && j == i + d)
            return 1.0;
        if (i >= d && j + d == i)
            return -1.0;
        return 0.0;
    };
    double defect = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double jij = jmat(i, j);
                    if (jij != 0.0)
                        s += m[i * n + a] * jij * m[j * n + b];
                }
            defect = std::max(defect, std::abs(s - jmat(a, b)));
        }
    return defect;
}

std::vector<SymplecticityTrial> symplecticity_audit(const OneStepMethod& method, int trials, double h_lo,
                                                    double h_hi, RngStream& rng, double box)
{
    if (trials < 1)
        throw DomainError("need at least one trial");
    if (!(h_lo > 0.0) || h_hi < h_lo)
        throw DomainError("need 0 < h_lo <= h_hi");
    std::vector<SymplecticityTrial> out;
    const auto d = static_cast<std::size_t>(method.d());
    for (int t = 0; t < trials; ++t) {
        SymplecticityTrial tr;
        tr.h = h_lo + (h_hi - h_lo) * rng.uniform();
        tr.x.p.resize(d);
        tr.x.q.resize(d);
        for (auto* v : {&tr.x.p, &tr.x.q})
            for (auto& e : *v)
                e = box * (2.0 * rng.uniform() - 1.0);
        const NoiseSample w = sample(tr.h, method.plan().m(), method.plan().indices(), NoiseMode::GaussianExact, rng);
        tr.defect = symplecticity_defect(method, tr.x, w);
        out.push_back(std::move(tr));
    }
    return out;
}

SchemeMap weak_scheme(const HamiltonianSystem& sys, int weak_order, SolverOptions options)
{
    return SchemeMap(to_ito_truncation(series(sys, 2 * static_cast<std::size_t>(weak_order)), weak_order), options);
}

} // namespace stochsym
