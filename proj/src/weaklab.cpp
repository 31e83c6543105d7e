#include "stochsym/weaklab.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "stochsym/errors.hpp"

namespace stochsym {

WeakObservable make_observable(std::string name, const Expr& e)
{
    Expr s = simplify(e);
    if (!is_polynomial(s))
        throw DomainError("observable " + name + " is not a polynomial in (p, q)");
    if (!free_symbols(s).parameters.empty())
        throw DomainError("observable " + name + " mentions parameters");
    return {std::move(name), std::move(s)};
}

WeakObservable parse_observable(const std::string& text)
{
    return make_observable(text, parse(text));
}

OscillatorMoments oscillator_oracle(double t, double sigma)
{
    if (!(t >= 0.0))
        throw DomainError("oracle time must be >= 0");
    const double s2 = sigma * sigma;
    OscillatorMoments m;
    m.mean_p = -std::sin(t);
    m.mean_q = std::cos(t);
    m.cov_pp = s2 * (t / 2 + std::sin(2 * t) / 4);
    m.cov_qq = s2 * (t / 2 - std::sin(2 * t) / 4);
    m.cov_pq = s2 * std::sin(t) * std::sin(t) / 2;
    m.energy = 1.0 + s2 * t;
    m.mean_pq = s2 * (1 - std::cos(2 * t)) / 4 - std::sin(2 * t) / 2;
    return m;
}

double oscillator_expectation(const Expr& phi, double t, double sigma)
{
    const OscillatorMoments m = oscillator_oracle(t, sigma);
    const PhaseVar x[2] = {momentum(1), position(1)};
    for (PhaseVar v : free_symbols(phi).variables)
        if (v.index != 1)
            throw DomainError("oscillator oracle is one-dimensional");
    // phi = c + a.x + x^T B x / 2 exactly when all third derivatives vanish.
    for (PhaseVar a : x)
        for (PhaseVar b : x)
            for (PhaseVar c : x)
                if (!is_zero(diff(diff(diff(phi, a), b), c)))
                    throw DomainError("oscillator oracle handles polynomials of degree <= 2");
    const Binding origin{{"p", 0.0}, {"q", 0.0}};
    const double mean[2] = {m.mean_p, m.mean_q};
    const double cov[2][2] = {{m.cov_pp, m.cov_pq}, {m.cov_pq, m.cov_qq}};
    double out = eval(phi, origin);
    for (int i = 0; i < 2; ++i) {
        out += eval(diff(phi, x[i]), origin) * mean[i];
        for (int j = 0; j < 2; ++j)
            out += 0.5 * eval(diff(diff(phi, x[i]), x[j]), origin) * (cov[i][j] + mean[i] * mean[j]);
    }
    return out;
}

std::string reference_name(ReferenceKind k)
{
    switch (k) {
    case ReferenceKind::AnalyticOracle:
        return "analytic";
    case ReferenceKind::FineStepSDE:
        return "fine_step_sde";
    case ReferenceKind::SchemeItself:
        return "scheme_itself";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

OrderFit fit_order(const std::vector<WeakRow>& rows)
{
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows)
        if (r.h > 0.0 && r.error > 0.0 && r.error > 3.0 * r.std_error)
            pts.emplace_back(std::log(r.h), std::log(r.error));
    if (pts.size() < 3)
        throw NumericError("order fit needs at least 3 rows with error > 3 SE, got " + std::to_string(pts.size()));
    const double n = static_cast<double>(pts.size());
    double mx = 0, my = 0;
    for (auto [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx <= 0.0)
        throw NumericError("order fit needs distinct step sizes");
    const double slope = sxy / sxx;
    double ssr = 0;
    for (auto [x, y] : pts) {
        const double r = y - my - slope * (x - mx);
        ssr += r * r;
    }
    const double dof = n - 2;
    const double se = std::sqrt(ssr / dof / sxx);
    const boost::math::students_t dist(dof);
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    return {slope, slope - t * se, slope + t * se, pts.size()};
}

namespace {

constexpr std::int64_t kBlock = 1000;

int step_count(double T, double h)
{
    if (!(h > 0.0) || !(T > 0.0))
        throw DomainError("T and h must be positive");
    const double n = std::round(T / h);
    if (n < 1 || std::abs(n * h - T) > 1e-9 * T)
        throw DomainError("T = " + std::to_string(T) + " is not a multiple of h = " + std::to_string(h));
    return static_cast<int>(n);
}

/// Runs fn(path, stats) for every path in deterministic blocks; block results
/// are merged in block order so the outcome does not depend on `threads`.
template <class Fn>
std::vector<RunningStats> run_paths(std::int64_t samples, std::size_t nstats, unsigned threads, Fn&& fn)
{
    const std::int64_t nblocks = (samples + kBlock - 1) / kBlock;
    std::vector<std::vector<RunningStats>> blocks(static_cast<std::size_t>(nblocks),
                                                  std::vector<RunningStats>(nstats));
    std::atomic<std::int64_t> next{0};
    std::vector<std::exception_ptr> errors(std::max(1u, threads));
    auto worker = [&](unsigned id) {
        try {
            auto local = fn; // per-thread workspaces live in the functor
            for (;;) {
                const std::int64_t b = next.fetch_add(1);
                if (b >= nblocks)
                    break;
                auto& st = blocks[static_cast<std::size_t>(b)];
                const std::int64_t end = std::min(samples, (b + 1) * kBlock);
                for (std::int64_t i = b * kBlock; i < end; ++i)
                    local(static_cast<std::uint64_t>(i), st);
            }
        } catch (...) {
            errors[id] = std::current_exception();
            next = nblocks;
        }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(nblocks)));
    if (nt == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nt; ++t)
            pool.emplace_back(worker, t);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    // pairwise reduction in block order
    while (blocks.size() > 1) {
        std::vector<std::vector<RunningStats>> next_level;
        for (std::size_t i = 0; i < blocks.size(); i += 2) {
            if (i + 1 < blocks.size())
                for (std::size_t k = 0; k < nstats; ++k)
                    blocks[i][k].merge(blocks[i + 1][k]);
            next_level.push_back(std::move(blocks[i]));
        }
        blocks = std::move(next_level);
    }
    return blocks.empty() ? std::vector<RunningStats>(nstats) : blocks.front();
}

Program compile_observables(const std::vector<WeakObservable>& phis, int d)
{
    std::vector<Expr> outs;
    for (const auto& phi : phis)
        outs.push_back(phi.expression);
    return Program::compile(outs, d, {});
}

/// Advances a method for n_steps with noise drawn from rng.
struct PathRunner {
    const OneStepMethod* method;
    std::vector<double> ws, noise, dw;
    StepStats stats;

    explicit PathRunner(const OneStepMethod& m)
        : method(&m), ws(m.workspace_size()), noise(m.plan().indices().size()),
          dw(static_cast<std::size_t>(m.plan().m()))
    {
    }

    void run(std::span<double> x, double h, int n_steps, RngStream& rng, NoiseMode mode)
    {
        for (int n = 0; n < n_steps; ++n) {
            method->plan().draw(h, mode, rng, dw, noise);
            method->advance(x, noise, ws, stats);
        }
    }

    /// Steps driven by given Wiener increments, `per` fine increments per step.
    void run_with(std::span<double> x, double h, int n_steps, std::span<const double> fine, int per, int m,
                  RngStream& rng)
    {
        for (int n = 0; n < n_steps; ++n) {
            for (int r = 0; r < m; ++r) {
                double s = 0.0;
                for (int i = 0; i < per; ++i)
                    s += fine[static_cast<std::size_t>((n * per + i) * m + r)];
                dw[static_cast<std::size_t>(r)] = s;
            }
            method->plan().fill(h, dw, rng, noise);
            method->advance(x, noise, ws, stats);
        }
    }
};

std::uint64_t stream_id(std::uint64_t group, std::uint64_t path)
{
    return (group << 40) | path;
}

} // namespace

namespace {

std::vector<MomentEstimate> ensemble_means_group(const OneStepMethod& method, const std::vector<WeakObservable>& phis,
                                                 const PhasePoint& x0, double h, int n_steps, std::int64_t samples,
                                                 std::uint64_t seed, std::uint64_t group, unsigned threads,
                                                 NoiseMode mode)
{
    if (samples < 2)
        throw DomainError("need at least 2 samples");
    const Program obs = compile_observables(phis, method.d());
    const std::vector<double> start = x0.flat();
    struct Fn {
        const Program* obs;
        const std::vector<double>* start;
        PathRunner runner;
        std::vector<double> x, vals;
        double h;
        int n_steps;
        std::uint64_t seed, group;
        NoiseMode mode;
        void operator()(std::uint64_t path, std::vector<RunningStats>& st)
        {
            RngStream rng(seed, stream_id(group, path));
            x = *start;
            runner.run(x, h, n_steps, rng, mode);
            obs->run(x, vals);
            for (std::size_t k = 0; k < vals.size(); ++k)
                st[k].add(vals[k]);
        }
    };
    Fn fn{&obs, &start, PathRunner(method), {}, std::vector<double>(phis.size()), h, n_steps, seed, group, mode};
    const auto st = run_paths(samples, phis.size(), threads, fn);
    std::vector<MomentEstimate> out;
    for (const auto& s : st)
        out.push_back({s.mean(), s.stderr_of_mean(), s.count()});
    return out;
}

} // namespace

std::vector<MomentEstimate> ensemble_means(const OneStepMethod& method, const std::vector<WeakObservable>& phis,
                                           const PhasePoint& x0, double h, int n_steps, std::int64_t samples,
                                           std::uint64_t seed, unsigned threads, NoiseMode mode)
{
    if (n_steps < 1)
        throw DomainError("need n_steps >= 1");
    return ensemble_means_group(method, phis, x0, h, n_steps, samples, seed, 0, threads, mode);
}

std::vector<WeakErrorReport> weak_error(const OneStepMethod& target, const Reference& reference,
                                        const std::vector<WeakObservable>& phis, const WeakStudy& study)
{
    if (phis.empty())
        throw DomainError("no observables");
    if (study.hs.empty())
        throw DomainError("no step sizes");
    if (study.samples < kMinWeakSamples)
        throw DomainError("weak error needs at least " + std::to_string(kMinWeakSamples) + " samples");
    const std::size_t nphi = phis.size();
    std::vector<WeakErrorReport> reports(nphi);
    for (std::size_t k = 0; k < nphi; ++k) {
        reports[k].phi = phis[k].name;
        reports[k].reference = reference.kind;
    }

    if (reference.kind == ReferenceKind::AnalyticOracle) {
        if (!reference.exact)
            throw DomainError("analytic reference needs an oracle");
        for (std::size_t hi = 0; hi < study.hs.size(); ++hi) {
            const double h = study.hs[hi];
            const auto est = ensemble_means_group(target, phis, study.x0, h, step_count(study.T, h), study.samples,
                                                  study.seed, 2 * hi + 1, study.threads, study.mode);
            for (std::size_t k = 0; k < nphi; ++k) {
                const double exact = reference.exact(phis[k], study.T);
                reports[k].rows.push_back(
                    {h, std::abs(est[k].mean - exact), est[k].std_error, est[k].samples, est[k].mean, exact});
            }
        }
    } else {
        if (!reference.sde)
            throw DomainError("SDE reference needs a system");
        const bool crn = study.common_random_numbers && reference.kind == ReferenceKind::FineStepSDE;
        if (crn && study.mode != NoiseMode::GaussianExact)
            throw DomainError("common random numbers need Gaussian increments");
        if (study.ref_factor < 1)
            throw DomainError("ref_factor must be >= 1");
        const double h_min = *std::min_element(study.hs.begin(), study.hs.end());
        const double h_ref = h_min / study.ref_factor;
        const int n_ref = step_count(study.T, h_ref);
        if (study.richardson && n_ref % 2 != 0)
            throw DomainError("Richardson extrapolation needs an even number of reference steps");
        const double work = static_cast<double>(study.samples) * n_ref * (study.richardson ? 1.5 : 1.0) *
                            static_cast<double>(study.hs.size());
        if (work > kReferenceWorkCap)
            throw CapExceeded("reference work " + std::to_string(work) + " exceeds cap");
        const Program obs = compile_observables(phis, target.d());
        const std::vector<double> start = study.x0.flat();

        for (std::size_t hi = 0; hi < study.hs.size(); ++hi) {
            const double h = study.hs[hi];
            const int n = step_count(study.T, h);
            const int per = static_cast<int>(std::lround(h / h_ref));
            if (crn && std::abs(per * h_ref - h) > 1e-9 * h)
                throw DomainError("common random numbers need h to be a multiple of the reference step");
            const HamiltonianSystem sys = reference.sde(h);
            if (sys.d != target.d() || sys.m != target.plan().m())
                throw DomainError("reference system shape differs from the target");
            const MidpointSde ref(sys);
            const int m = sys.m;

            // stats: [0, nphi) target, [nphi, 2 nphi) reference, [2 nphi, 3 nphi) difference
            struct Fn {
                const Program* obs;
                const std::vector<double>* start;
                PathRunner tgt, fine;
                std::vector<double> x, y, z, vt, vr, vr2, incr;
                double h, h_ref;
                int n, n_ref, per, m;
                bool crn, richardson;
                NoiseMode mode;
                std::uint64_t seed, hi;

                void reference_values(RngStream& rng)
                {
                    const auto sm = static_cast<std::size_t>(m);
                    incr.resize(static_cast<std::size_t>(n_ref) * sm);
                    const double s = std::sqrt(h_ref);
                    for (auto& v : incr)
                        v = s * rng.normal();
                    y = *start;
                    for (int i = 0; i < n_ref; ++i) {
                        fine.noise[0] = h_ref;
                        for (std::size_t r = 0; r < sm; ++r)
                            fine.noise[r + 1] = incr[static_cast<std::size_t>(i) * sm + r];
                        fine.method->advance(y, fine.noise, fine.ws, fine.stats);
                    }
                    obs->run(y, vr);
                    if (!richardson)
                        return;
                    z = *start;
                    for (int i = 0; i < n_ref / 2; ++i) {
                        fine.noise[0] = 2 * h_ref;
                        for (std::size_t r = 0; r < sm; ++r)
                            fine.noise[r + 1] = incr[2 * static_cast<std::size_t>(i) * sm + r] +
                                                incr[(2 * static_cast<std::size_t>(i) + 1) * sm + r];
                        fine.method->advance(z, fine.noise, fine.ws, fine.stats);
                    }
                    obs->run(z, vr2);
                    for (std::size_t k = 0; k < vr.size(); ++k)
                        vr[k] = 2 * vr[k] - vr2[k];
                }

                void operator()(std::uint64_t path, std::vector<RunningStats>& st)
                {
                    const std::size_t nphi = vt.size();
                    if (crn) {
                        RngStream rng(seed, stream_id(0, path));
                        reference_values(rng);
                        x = *start;
                        tgt.run_with(x, h, n, incr, per, m, rng);
                    } else {
                        RngStream rr(seed, stream_id(2 * hi + 2, path));
                        reference_values(rr);
                        RngStream rt(seed, stream_id(2 * hi + 1, path));
                        x = *start;
                        tgt.run(x, h, n, rt, mode);
                    }
                    obs->run(x, vt);
                    for (std::size_t k = 0; k < nphi; ++k) {
                        st[k].add(vt[k]);
                        st[nphi + k].add(vr[k]);
                        st[2 * nphi + k].add(vt[k] - vr[k]);
                    }
                }
            };
            Fn fn{&obs,  &start, PathRunner(target), PathRunner(ref), {}, {}, {},
                  std::vector<double>(nphi), std::vector<double>(nphi), std::vector<double>(nphi), {},
                  h,     h_ref,  n,     n_ref,    per,  m,  crn,  study.richardson, study.mode, study.seed, hi};
            const auto st = run_paths(study.samples, 3 * nphi, study.threads, fn);
            for (std::size_t k = 0; k < nphi; ++k) {
                const RunningStats& t = st[k];
                const RunningStats& r = st[nphi + k];
                const RunningStats& dlt = st[2 * nphi + k];
                // Independent runs: the SE of a difference of independent means.
                const double se = crn ? dlt.stderr_of_mean()
                                      : std::hypot(t.stderr_of_mean(), r.stderr_of_mean());
                reports[k].rows.push_back({h, std::abs(dlt.mean()), se, t.count(), t.mean(), r.mean()});
            }
        }
    }

    for (auto& rep : reports) {
        try {
            rep.fit = fit_order(rep.rows);
        } catch (const NumericError& e) {
            rep.fit_error = e.what();
        }
    }
    return reports;
}

void write_weak_report(std::ostream& os, const WeakErrorReport& report)
{
    auto num = [](double v) {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        (void)ec;
        return std::string(buf, ptr);
    };
    os << "phi,reference,h,error,stderr,samples\n";
    for (const auto& r : report.rows)
        os << '"' << report.phi << "\"," << reference_name(report.reference) << ',' << num(r.h) << ','
           << num(r.error) << ',' << num(r.std_error) << ',' << r.samples << '\n';
    os << "fitted_order,ci_low,ci_high\n";
    if (report.fit)
        os << num(report.fit->order) << ',' << num(report.fit->ci_low) << ',' << num(report.fit->ci_high) << '\n';
    else
        os << ",,\n";
}

} // namespace stochsym
