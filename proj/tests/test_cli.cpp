#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stochsym/cli.hpp"
#include "stochsym/config.hpp"
#include "stochsym/errors.hpp"

using namespace stochsym;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = STOCHSYM_CONFIG_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "stochsym");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("stochsym_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const fs::path& path, const std::string& text)
{
    std::ofstream(path) << text;
    return path.string();
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kBadExpression = R"([system]
name = broken
d = 1
m = 1
[hamiltonians]
H0 = "(p^2 + q^2)/2"
H1 = "sigma * * q"
[parameters]
sigma = 0.5
)";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("config files")
{
    const auto cfg = load_config(kConfigDir + "/synchrotron.cfg");
    CHECK(cfg.name == "synchrotron");
    CHECK(cfg.system.m == 2);
    CHECK(cfg.system.parameters.at("sigma2") == 0.3);
    CHECK(cfg.initial.q[0] == 1.0);
    CHECK(cfg.samples == 100000);

    CHECK_THROWS_AS(parse_config("[system]\nd = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[sistem]\nd = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[system]\nd = 1\nm = 0\nd = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[system]\nd = x\nm = 0\n[hamiltonians]\nH0 = \"p\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[system]\nd = 1\nm = 0\n[hamiltonians]\nH0 = \"p*k\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[system]\nd = 1\nm = 0\n[parameters]\nh = 1\n[hamiltonians]\nH0 = \"p\"\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("[system]\nd = 1\nm = 0\n[hamiltonians]\nH0 = \"p\"\nH1 = \"q\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(kBadExpression), ParseError);
    const auto ok = parse_config("[system] # comment\nd = 1\nm = 0\n[hamiltonians]\nH0 = \"p^2/2\" # kinetic\n");
    CHECK(ok.system.m == 0);
}

TEST_CASE("exit codes")
{
    const auto dir = scratch("exit");
    const std::string osc = kConfigDir + "/oscillator.cfg";
    const std::string out = (dir / "out").string();

    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
    CHECK(run_cli({"simulate"}).code == cli::kUsage);
    CHECK(run_cli({"simulate", "--config", osc, "--bogus"}).code == cli::kUsage);
    CHECK(run_cli({"simulate", "--config", osc, "--out-dir", out, "--h", "-0.1"}).code == cli::kUsage);
    CHECK(run_cli({"simulate", "--config", osc, "--out-dir", out, "--h", "0.3", "--T", "1"}).code == cli::kUsage);
    CHECK(run_cli({"derive-genfun", "--config", osc, "--out-dir", out, "--max-len", "7"}).code == cli::kUsage);
    CHECK(run_cli({"weak-order", "--config", osc, "--out-dir", out, "--samples", "10"}).code == cli::kUsage);
    CHECK(run_cli({"simulate", "--help"}).code == cli::kOk);

    CHECK(run_cli({"simulate", "--config", (dir / "missing.cfg").string()}).code == cli::kConfig);
    const auto bad = write_file(dir / "bad.cfg", kBadExpression);
    const auto r = run_cli({"derive-genfun", "--config", bad, "--out-dir", out});
    CHECK(r.code == cli::kConfig);
    CHECK(r.err.find("H1") != std::string::npos);
    CHECK(r.err.find("position 8") != std::string::npos);

    const auto blow = write_file(dir / "blow.cfg", "[system]\nname = cubic\nd = 1\nm = 1\n[hamiltonians]\n"
                                                   "H0 = \"p^2/2 - q^4\"\nH1 = \"0.1*q\"\n[initial]\nq = 10\n");
    CHECK(run_cli({"simulate", "--config", blow, "--out-dir", out, "--h", "0.5", "--T", "25"}).code == cli::kNumeric);

    const auto kubo = run_cli({"derive-modified", "--config", kConfigDir + "/kubo.cfg", "--out-dir", out});
    CHECK(kubo.code == cli::kUnsupported);
    CHECK(kubo.err.find("fully multiplicative") != std::string::npos);
}

TEST_CASE("derivation commands")
{
    const auto dir = scratch("derive");
    const auto r = run_cli({"derive-genfun", "--config", kConfigDir + "/oscillator.cfg", "--out-dir", dir.string()});
    REQUIRE(r.code == cli::kOk);
    const std::string text = slurp(dir / "genfun.txt");
    CHECK(text == r.out);
    CHECK(text.find("(0,1); Stratonovich; -sigma*P; false") != std::string::npos);
    CHECK(text.find("(0,0); Stratonovich; P*q; false") != std::string::npos);
    CHECK(text.find("(1); Ito; -sigma*q; false") != std::string::npos);

    const auto syn = run_cli({"derive-genfun", "--config", kConfigDir + "/synchrotron.cfg", "--out-dir",
                              dir.string(), "--max-len", "1"});
    REQUIRE(syn.code == cli::kOk);
    CHECK(syn.out.find("(1); Stratonovich; sigma1*sin(q); false") != std::string::npos);

    const auto m = run_cli({"derive-modified", "--config", kConfigDir + "/oscillator.cfg", "--out-dir", dir.string()});
    REQUIRE(m.code == cli::kOk);
    CHECK(slurp(dir / "modified.txt").find("dq = (p - 0.05*q) dt + (0.05*sigma) o dW1") != std::string::npos);

    const auto mt = run_cli({"match", "--config", kConfigDir + "/oscillator.cfg", "--out-dir", dir.string()});
    REQUIRE(mt.code == cli::kOk);
    const std::string csv = slurp(dir / "match.csv");
    CHECK(csv.rfind("pair,h,residual,slope\n", 0) == 0);
    CHECK(csv.find("k,min_slope,passed,verified_dimension\n2,") != std::string::npos);
    CHECK(csv.find(",true,true\n") != std::string::npos);

    const auto sy = run_cli({"symplecticity", "--config", kConfigDir + "/synchrotron.cfg", "--out-dir", dir.string(),
                             "--samples", "20"});
    REQUIRE(sy.code == cli::kOk);
    CHECK(slurp(dir / "symplecticity.csv").rfind("trial,h,scheme_defect,control_defect\n", 0) == 0);
}

TEST_CASE("outputs are reproducible under a fixed seed")
{
    const auto a = scratch("seed_a");
    const auto b = scratch("seed_b");
    for (const auto& d : {a, b})
        REQUIRE(run_cli({"simulate", "--config", kConfigDir + "/synchrotron.cfg", "--seed", "7", "--out-dir",
                         d.string()})
                    .code == cli::kOk);
    CHECK(slurp(a / "path.csv") == slurp(b / "path.csv"));
    CHECK(slurp(a / "path.csv").size() > 100);

    const std::vector<std::string> study{"weak-order", "--config", kConfigDir + "/oscillator.cfg", "--seed", "7",
                                         "--samples", "10000", "--levels", "3", "--phi", "q"};
    auto with = [&](const fs::path& d, const char* threads) {
        auto args = study;
        args.insert(args.end(), {"--out-dir", d.string(), "--threads", threads});
        return run_cli(args).code;
    };
    REQUIRE(with(a, "1") == cli::kOk);
    REQUIRE(with(b, "3") == cli::kOk);
    const std::string wa = slurp(a / "weak_q.csv");
    CHECK(wa == slurp(b / "weak_q.csv"));
    CHECK(wa.rfind("phi,reference,h,error,stderr,samples\n\"q\",analytic,0.2,", 0) == 0);
}

}
