#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "extliou/scenario.hpp"

using namespace extliou;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("extliou_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

json gapless(const std::string& action)
{
    return json::parse(R"({
      "model": {"system": "spin-boson",
                "environment": {"type": "lorentzian", "gamma": 0.5, "lambda": 1.0}},
      "action": {"type": ")" + action + R"("}
    })");
}

std::string field_of(const json& doc, const std::string& sub)
{
    try {
        parse_config(doc, sub);
    } catch (const ConfigError& e) {
        return e.field;
    }
    return "";
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(EXTLIOU_CLI) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("config validation names the offending field", "[cli]")
{
    json d = gapless("sweep");
    d["model"]["environment"].erase("lambda");
    CHECK(field_of(d, "sweep") == "model.environment.lambda");

    d = gapless("sweep");
    d["model"]["environment"]["gamma"] = -1;
    CHECK(field_of(d, "sweep") == "model.environment.gamma");

    d = gapless("sweep");
    d["model"]["environment"]["type"] = "bandgap";
    CHECK(field_of(d, "sweep") == "model.environment.q");
    d["model"]["environment"]["q"] = 1.0;
    CHECK(field_of(d, "sweep") == "model.environment.q");

    d = gapless("sweep");
    CHECK(field_of(d, "dynamics") == "action.type");
    d.erase("model");
    CHECK(field_of(d, "sweep") == "model");

    d = gapless("sweep");
    d["numeric"] = {{"tier", 2.5}};
    CHECK(field_of(d, "sweep") == "numeric.tier");
    d["numeric"] = {{"tol_rank", 0}};
    CHECK(field_of(d, "sweep") == "numeric.tol_rank");

    d = gapless("sweep");
    d["output"] = {{"formats", {"png"}}};
    CHECK(field_of(d, "sweep") == "output.formats[0]");

    d = json::parse(R"({"model": {"system": "bosonic-network",
                                  "environment": {"gamma": 1, "lambda": 1},
                                  "network": {"omega": [0, 0], "chi": [[0, 0.2], [0.3, 0]]}}})");
    CHECK(field_of(d, "sweep") == "model.network.chi");

    d = gapless("sweep");
    CHECK(field_of(d, "sweep").empty());
    const auto c = parse_config(d, "");
    CHECK(c.action == "sweep");
    CHECK(c.environment.gamma == 0.5);
}

TEST_CASE("rates are normalized by the width", "[cli]")
{
    json d = gapless("sweep");
    d["model"]["environment"]["lambda"] = 4.0;
    d["model"]["environment"]["gamma"] = 0.25;
    const auto c = parse_config(d, "sweep");
    CHECK(c.environment.lambda == 1.0);
    CHECK(c.environment.gamma == 0.25);
    CHECK(c.lambda_unit == 4.0);
}

TEST_CASE("sweep action writes deterministic artifacts", "[cli]")
{
    json d = gapless("sweep");
    d["action"].update({{"from", 0.05}, {"to", 1.0}, {"points", 96}});
    auto c = parse_config(d, "sweep");
    c.formats = {"csv", "json", "svg"};
    const auto dir = scratch("sweep");
    const auto r1 = run(c, dir.string(), 1);
    CHECK(r1.exit_code == 0);
    const std::string csv = slurp(dir / "sweep.csv");
    CHECK(csv.rfind("gamma,track,re,im\n", 0) == 0);
    CHECK(fs::exists(dir / "sweep.svg"));
    CHECK(fs::exists(dir / "sweep.json"));
    const auto first = r1.summary["sweep"]["first_complex"].get<double>();
    CHECK(first > 0.5);
    CHECK(first < 0.52);

    const auto m = json::parse(slurp(dir / "manifest.json"));
    CHECK(m["numeric"]["tol_cluster"] == 1e-4);
    CHECK(m["libraries"].contains("eigen"));
    CHECK_FALSE(m.contains("timestamp"));
    CHECK_FALSE(m.contains("created"));

    const auto dir2 = scratch("sweep2");
    run(c, dir2.string(), 3);
    CHECK(slurp(dir2 / "sweep.csv") == csv);
    CHECK(slurp(dir2 / "manifest.json") == slurp(dir / "manifest.json"));
}

TEST_CASE("ep-find action", "[cli]")
{
    json d = gapless("ep-find");
    d["model"]["environment"] = {{"type", "bandgap"}, {"gamma", 0.3}, {"lambda", 1.0}, {"q", 0.25}};
    d["action"].update({{"bracket", {0.2, 0.6}}});
    auto c = parse_config(d, "ep-find");
    c.formats = {"csv", "json"};
    const auto dir = scratch("ep");
    const auto r = run(c, dir.string());
    CHECK(std::abs(r.summary["located"].get<double>() - 0.375) < 1e-6);
    const std::string txt = slurp(dir / "ep.txt");
    CHECK(txt.find("chains 3 1") != std::string::npos);
    CHECK(txt.find("chains 2 2 2 2") != std::string::npos);

    d = json::parse(R"({"model": {"system": "bosonic-network",
                                  "environment": {"gamma": 0.5925925925925926, "lambda": 1},
                                  "network": {"omega": [0, 0], "chi": [[0, 0.2], [0.2, 0]]}},
                        "action": {"bracket": [0.1, 0.3]}})");
    c = parse_config(d, "ep-find");
    const auto r2 = run(c, scratch("ep3").string());
    CHECK(std::abs(r2.summary["located"].get<double>() - 1 / (3 * std::sqrt(3.0))) < 1e-6);

    d["action"]["bracket"] = {0.3, 0.1};
    CHECK(field_of(d, "ep-find").empty());
    CHECK_THROWS_AS(run(parse_config(d, "ep-find"), scratch("ep4").string()), ConfigError);
}

TEST_CASE("dynamics action", "[cli]")
{
    json d = gapless("dynamics");
    d["model"]["mapping"] = "both";
    d["action"].update({{"grid", "linear"}, {"t_max", 10}, {"points", 51}});
    auto c = parse_config(d, "dynamics");
    c.formats = {"csv", "svg"};
    const auto dir = scratch("dyn");
    const auto r = run(c, dir.string());
    CHECK(r.summary["pmeom_vs_heom"].get<double>() < 1e-8);
    CHECK(r.summary["trajectory_vs_analytic"].get<double>() < 1e-8);
    CHECK(slurp(dir / "trajectory.csv").rfind("t,re_00", 0) == 0);
    CHECK(fs::exists(dir / "trajectory_heom.csv"));
    CHECK(fs::exists(dir / "trajectory.svg"));

    d["action"]["rho0"] = {{0.5, 0.5}, {0.5, 0.6}};
    CHECK(field_of(d, "dynamics").empty());
    CHECK_THROWS_AS(run(parse_config(d, "dynamics"), scratch("dyn2").string()), ConfigError);
}

TEST_CASE("sensitivity action", "[cli]")
{
    json d = json::parse(R"({"model": {"system": "bosonic-network",
                                  "environment": {"gamma": 1, "lambda": 1},
                                  "network": {"omega": [0, 0], "chi": [[0, 0.5], [0.5, 0]], "markovian": true}}})");
    const auto r = run(parse_config(d, "sensitivity"), scratch("sens").string());
    CHECK(r.summary["target"] == "ep2-markov");
    CHECK(std::abs(r.summary["exponent"].get<double>() - 0.5) < 0.02);
}

TEST_CASE("command-line exit codes", "[cli]")
{
    const fs::path src = EXTLIOU_SOURCE_DIR;
    CHECK(run_cli("sweep --config " + (src / "tests/data/missing_lambda.json").string() + " --out " +
                  scratch("cli_bad").string()) == 2);
    CHECK(run_cli("sweep --config /nonexistent/config.json") == 4);

    const auto out = scratch("cli_ok");
    CHECK(run_cli("sweep --config " + (src / "samples/configs/gapless_sweep.json").string() + " --out " +
                  out.string() + " --format csv --format svg --jobs 2") == 0);
    CHECK(fs::exists(out / "sweep.csv"));
    CHECK(fs::exists(out / "sweep.svg"));
    CHECK_FALSE(fs::exists(out / "sweep.json"));

    // environment override applies when --out is absent
    const auto env_out = scratch("cli_env");
    const std::string cmd = std::string(kOutDirEnv) + "=" + env_out.string() + " " + EXTLIOU_CLI +
                            " ep-find --config " + (src / "samples/configs/gapless_ep.json").string() +
                            " >/dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(env_out / "manifest.json"));

    // a read-only target directory is an I/O failure
    CHECK(run_cli("sweep --config " + (src / "samples/configs/gapless_sweep.json").string() +
                  " --out /proc/extliou_cannot_write") == 4);
}
