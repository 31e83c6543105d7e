#include "stochsym/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "stochsym/config.hpp"
#include "stochsym/errors.hpp"
#include "stochsym/genfun.hpp"
#include "stochsym/integrator.hpp"
#include "stochsym/modified.hpp"
#include "stochsym/weaklab.hpp"

namespace stochsym::cli {

namespace {

std::string num(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string out_dir = ".";
};

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config, "system definition file")->required();
    sub->add_option("--seed", c.seed, "random seed (default from config)");
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", c.out_dir, "directory for output files");
}

std::ofstream open_output(const Common& c, const std::string& file)
{
    std::filesystem::create_directories(c.out_dir);
    const auto path = std::filesystem::path(c.out_dir) / file;
    std::ofstream out(path);
    if (!out)
        throw DomainError("cannot write " + path.string());
    return out;
}

std::string slug(const std::string& s)
{
    std::string out;
    for (char ch : s) {
        if (std::isalnum(static_cast<unsigned char>(ch)))
            out += ch;
        else if (ch == '^')
            out += "pow";
        else if (ch == '*')
            out += "x";
        else if (ch == '+')
            out += "plus";
        else if (ch == '-')
            out += "minus";
        else
            out += '_';
    }
    return out;
}

/// sigma when the system is dp = -q dt + sigma dW, dq = p dt started at (0, 1).
std::optional<double> oscillator_sigma(const SystemConfig& cfg)
{
    const HamiltonianSystem& s = cfg.system;
    if (s.d != 1 || s.m != 1)
        return std::nullopt;
    if (!is_zero(simplify(s.H(0) - parse("(p^2+q^2)/2"))))
        return std::nullopt;
    const Expr g = diff(s.H(1), position(1));
    if (!is_zero(diff(s.H(1), momentum(1))) || depends_on(g, PhaseVar::Kind::Q) || depends_on(g, PhaseVar::Kind::P))
        return std::nullopt;
    if (cfg.initial.p[0] != 0.0 || cfg.initial.q[0] != 1.0)
        return std::nullopt;
    return -eval(g, s.parameters);
}

std::vector<double> ladder(double h, int levels)
{
    std::vector<double> hs;
    for (int i = 0; i < levels; ++i)
        hs.push_back(h / std::pow(2.0, i));
    return hs;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Weak symplectic schemes and modified equations for stochastic Hamiltonian systems", "stochsym"};
    app.set_help_flag("--help", "print this help and exit");
    app.require_subcommand(1);

    // derive-genfun
    Common gf_c;
    std::size_t gf_len = 2;
    int gf_k = 1;
    auto* gf = app.add_subcommand("derive-genfun", "generating-function coefficients in both bases");
    add_common(gf, gf_c);
    gf->add_option("--max-len", gf_len, "longest Stratonovich index");
    gf->add_option("--weak-order", gf_k, "weak order of the Ito truncation (1 or 2)");

    // simulate
    Common sim_c;
    std::optional<double> sim_h, sim_T;
    int sim_k = 1;
    std::string sim_method = "scheme";
    auto* sim = app.add_subcommand("simulate", "one path of the scheme");
    add_common(sim, sim_c);
    sim->add_option("--h", sim_h, "step size");
    sim->add_option("--T", sim_T, "final time");
    sim->add_option("--weak-order", sim_k, "weak order of the scheme (1 or 2)");
    sim->add_option("--method", sim_method, "scheme, midpoint or euler-maruyama")
        ->check(CLI::IsMember({"scheme", "midpoint", "euler-maruyama"}));

    // symplecticity
    Common sy_c;
    int sy_trials = 100;
    double sy_hmin = 1e-3, sy_hmax = 1e-1;
    auto* sy = app.add_subcommand("symplecticity", "frozen-noise Jacobian audit against Euler-Maruyama");
    add_common(sy, sy_c);
    sy->add_option("--samples", sy_trials, "number of random (x, w, h) triples");
    sy->add_option("--h-min", sy_hmin, "smallest step size");
    sy->add_option("--h", sy_hmax, "largest step size");

    // derive-modified
    Common dm_c;
    std::optional<double> dm_h;
    auto* dm = app.add_subcommand("derive-modified", "first-order modified system");
    add_common(dm, dm_c);
    dm->add_option("--h", dm_h, "step size for the instantiated SDE");

    // match
    Common mt_c;
    int mt_k = 2;
    double mt_h = 0.02;
    std::size_t mt_points = 10;
    bool mt_zero = false;
    auto* mt = app.add_subcommand("match", "moment-matching residuals of scheme and modified system");
    add_common(mt, mt_c);
    mt->add_option("--weak-order", mt_k, "matching order k (1 or 2)");
    mt->add_option("--h", mt_h, "largest step size (halved once)");
    mt->add_option("--samples", mt_points, "number of random phase points");
    mt->add_flag("--zero-corrections", mt_zero, "compare against the uncorrected system");

    // weak-order
    Common wo_c;
    std::optional<double> wo_T;
    std::optional<std::int64_t> wo_samples;
    double wo_h = 0.2;
    int wo_levels = 4;
    int wo_k = 1;
    std::string wo_ref = "auto";
    bool wo_crn = false;
    std::vector<std::string> wo_phi;
    auto* wo = app.add_subcommand("weak-order", "weak error study and order fit");
    add_common(wo, wo_c);
    wo->add_option("--h", wo_h, "largest step size");
    wo->add_option("--levels", wo_levels, "number of step sizes (halving)");
    wo->add_option("--T", wo_T, "final time");
    wo->add_option("--samples", wo_samples, "paths per step size");
    wo->add_option("--weak-order", wo_k, "weak order of the scheme (1 or 2)");
    wo->add_option("--reference", wo_ref, "auto, analytic, fine-step, modified or modified-zero")
        ->check(CLI::IsMember({"auto", "analytic", "fine-step", "modified", "modified-zero"}));
    wo->add_flag("--crn", wo_crn, "couple target and reference through common random numbers");
    wo->add_option("--phi", wo_phi, "polynomial observable (repeatable)");

    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gf) {
            const SystemConfig cfg = load_config(gf_c.config);
            if (gf_k != 1 && gf_k != 2)
                throw DomainError("weak order must be 1 or 2");
            const GenFunSeries strat = series(cfg.system, gf_len);
            const std::size_t need = 2 * static_cast<std::size_t>(gf_k);
            const GenFunSeries ito = to_ito_truncation(
                gf_len >= need ? strat : series(cfg.system, need), gf_k);
            auto file = open_output(gf_c, "genfun.txt");
            std::ostringstream rep;
            rep << "# system " << cfg.system.name << ", d = " << cfg.system.d << ", m = " << cfg.system.m << '\n';
            rep << "# " << strat.truncation << '\n';
            for (const auto& line : derivation_report(strat))
                rep << line << '\n';
            rep << "# " << ito.truncation << '\n';
            for (const auto& line : derivation_report(ito))
                rep << line << '\n';
            file << rep.str();
            out << rep.str();
            return kOk;
        }

        if (*sim) {
            const SystemConfig cfg = load_config(sim_c.config);
            const double h = sim_h.value_or(cfg.h);
            const double T = sim_T.value_or(cfg.T);
            if (!(h > 0.0) || !(T > 0.0))
                throw DomainError("h and T must be positive");
            const double n = std::round(T / h);
            if (n < 1 || std::abs(n * h - T) > 1e-9 * T)
                throw DomainError("T must be a multiple of h");
            std::unique_ptr<OneStepMethod> method;
            if (sim_method == "scheme")
                method = std::make_unique<SchemeMap>(weak_scheme(cfg.system, sim_k));
            else if (sim_method == "midpoint")
                method = std::make_unique<MidpointSde>(cfg.system);
            else
                method = std::make_unique<EulerMaruyama>(cfg.system);
            RngStream rng(sim_c.seed.value_or(cfg.seed), 0);
            const auto path = simulate(*method, cfg.initial, h, static_cast<int>(n), rng);
            auto file = open_output(sim_c, "path.csv");
            write_path_csv(file, path, h);
            out << "wrote " << path.size() << " states to " << (std::filesystem::path(sim_c.out_dir) / "path.csv").string()
                << '\n';
            return kOk;
        }

        if (*sy) {
            const SystemConfig cfg = load_config(sy_c.config);
            const SchemeMap scheme = weak_scheme(cfg.system);
            const EulerMaruyama control(cfg.system);
            const std::uint64_t seed = sy_c.seed.value_or(cfg.seed);
            RngStream r1(seed, 0), r2(seed, 0);
            const auto a = symplecticity_audit(scheme, sy_trials, sy_hmin, sy_hmax, r1);
            const auto b = symplecticity_audit(control, sy_trials, sy_hmin, sy_hmax, r2);
            auto file = open_output(sy_c, "symplecticity.csv");
            file << "trial,h,scheme_defect,control_defect\n";
            double worst = 0.0, control_worst = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                file << i << ',' << num(a[i].h) << ',' << num(a[i].defect) << ',' << num(b[i].defect) << '\n';
                worst = std::max(worst, a[i].defect);
                control_worst = std::max(control_worst, b[i].defect);
            }
            out << "max scheme defect " << num(worst) << ", max control defect " << num(control_worst) << '\n';
            return kOk;
        }

        if (*dm) {
            const SystemConfig cfg = load_config(dm_c.config);
            const double h = dm_h.value_or(cfg.h);
            const NoiseClass cls = classify_noise(cfg.system);
            const ModifiedSystem msys = first_order_modified(cfg.system);
            std::ostringstream rep;
            rep << "# system " << cfg.system.name << "; noise " << noise_class_name(cls) << '\n';
            rep << "# first-order corrections\n";
            for (int j = 0; j <= cfg.system.m; ++j)
                rep << "H" << j << "_1 = " << to_string(msys.correction(j, 1)) << '\n';
            rep << "# modified Hamiltonians in the step size h\n";
            const auto tilde = modified_hamiltonians(msys);
            for (std::size_t j = 0; j < tilde.size(); ++j)
                rep << "H" << j << "~ = " << to_string(tilde[j]) << '\n';
            rep << "# Stratonovich SDE at h = " << num(h) << '\n';
            for (const auto& line : render_sde(modified_sde(msys, h)))
                rep << line << '\n';
            auto file = open_output(dm_c, "modified.txt");
            file << rep.str();
            out << rep.str();
            return kOk;
        }

        if (*mt) {
            const SystemConfig cfg = load_config(mt_c.config);
            const ModifiedSystem msys =
                mt_zero ? zero_corrections(cfg.system) : first_order_modified(cfg.system);
            RngStream rng(mt_c.seed.value_or(cfg.seed), 0);
            const auto rep = matching_residuals(cfg.system, msys, mt_k, {mt_h, mt_h / 2}, mt_points, rng);
            auto file = open_output(mt_c, "match.csv");
            file << "pair,h,residual,slope\n";
            for (const auto& p : rep.pairs)
                for (std::size_t i = 0; i < rep.hs.size(); ++i)
                    file << p.name << ',' << num(rep.hs[i]) << ',' << num(p.residual[i]) << ',' << num(p.slope)
                         << '\n';
            file << "k,min_slope,passed,verified_dimension\n";
            file << rep.k << ',' << num(rep.min_slope) << ',' << (rep.passed ? "true" : "false") << ','
                 << (rep.verified_dimension ? "true" : "false") << '\n';
            out << "k = " << rep.k << ", min slope " << num(rep.min_slope) << (rep.passed ? " (pass)" : " (fail)")
                << (rep.verified_dimension ? "" : ", pair list unverified for d > 1") << '\n';
            return kOk;
        }

        if (*wo) {
            const SystemConfig cfg = load_config(wo_c.config);
            if (wo_levels < 3)
                throw DomainError("an order fit needs at least 3 step sizes");
            WeakStudy study;
            study.T = wo_T.value_or(cfg.T);
            study.hs = ladder(wo_h, wo_levels);
            study.samples = wo_samples.value_or(cfg.samples);
            study.seed = wo_c.seed.value_or(cfg.seed);
            study.threads = wo_c.threads;
            study.x0 = cfg.initial;
            study.common_random_numbers = wo_crn;
            if (wo_phi.empty())
                wo_phi = {"p", "q", "p^2+q^2", "p*q"};
            std::vector<WeakObservable> phis;
            for (const auto& s : wo_phi)
                phis.push_back(parse_observable(s));

            const SchemeMap scheme = weak_scheme(cfg.system, wo_k);
            Reference ref;
            std::string kind = wo_ref;
            const auto sigma = oscillator_sigma(cfg);
            if (kind == "auto")
                kind = sigma ? "analytic" : "fine-step";
            if (kind == "analytic") {
                if (!sigma)
                    throw DomainError("the analytic oracle covers the linear oscillator started at (0, 1)");
                ref.kind = ReferenceKind::AnalyticOracle;
                const double s = *sigma;
                ref.exact = [s](const WeakObservable& phi, double T) {
                    return oscillator_expectation(phi.expression, T, s);
                };
            } else {
                ref.kind = ReferenceKind::FineStepSDE;
                if (kind == "fine-step") {
                    const HamiltonianSystem sys = cfg.system;
                    ref.sde = [sys](double) { return sys; };
                } else {
                    const ModifiedSystem msys = kind == "modified" ? first_order_modified(cfg.system)
                                                                   : zero_corrections(cfg.system);
                    ref.sde = [msys](double h) { return modified_sde(msys, h); };
                }
            }
            const auto reports = weak_error(scheme, ref, phis, study);
            for (const auto& r : reports) {
                auto file = open_output(wo_c, "weak_" + slug(r.phi) + ".csv");
                write_weak_report(file, r);
                out << r.phi << ": ";
                if (r.fit)
                    out << "order " << num(r.fit->order) << " [" << num(r.fit->ci_low) << ", "
                        << num(r.fit->ci_high) << "]\n";
                else
                    out << "no fit (" << r.fit_error << ")\n";
            }
            return kOk;
        }
    } catch (const UnsupportedSystem& e) {
        err << "unsupported system: " << e.what() << '\n';
        return kUnsupported;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const DomainError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const CapExceeded& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumeric;
    }
    return kUsage;
}

int run(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace stochsym::cli
