#include "ringfc_app/app.hpp"
#include "ringfc_app/csv.hpp"
#include "ringfc_app/errors.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

using namespace ringfc::app;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("ringfc_cli_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& s)
{
    std::ofstream f(p, std::ios::binary);
    f << s;
}

struct Run {
    int code;
    std::string out, err;
};

Run run_cmd(Command c, GlobalOptions g, CommandOptions o = {})
{
    std::ostringstream out, err;
    const int code = run_main(c, g, o, out, err);
    return {code, out.str(), err.str()};
}

fs::path config(const std::string& name) { return fs::path(RINGFC_CONFIG_DIR) / name; }

} // namespace

TEST_CASE("purity from the command line")
{
    TempDir t;
    GlobalOptions g;
    g.out_dir = t.path;
    CommandOptions o;
    o.ratios = {100};
    const Run r = run_cmd(Command::purity, g, o);
    REQUIRE(r.code == 0);
    const json s = json::parse(slurp(t.path / "purity.json"));
    CHECK(s["purity"].get<double>() == doctest::Approx(0.999).epsilon(0.005));
    const auto head = slurp(t.path / "purity.csv").substr(0, slurp(t.path / "purity.csv").find('\n'));
    CHECK(head == "ratio,purity,n_grid,last_change");
}

TEST_CASE("synthetic data is reproducible for a fixed seed")
{
    TempDir a, b;
    GlobalOptions g;
    g.config = config("synth_linear.json");
    g.seed = 7;
    g.out_dir = a.path;
    REQUIRE(run_cmd(Command::synth, g).code == 0);
    g.out_dir = b.path;
    REQUIRE(run_cmd(Command::synth, g).code == 0);
    const std::string ma = slurp(a.path / "map.csv");
    CHECK(!ma.empty());
    CHECK(ma == slurp(b.path / "map.csv"));
    g.seed = 8;
    g.out_dir = b.path;
    REQUIRE(run_cmd(Command::synth, g).code == 0);
    CHECK(ma != slurp(b.path / "map.csv"));
}

TEST_CASE("manifest records the run")
{
    TempDir t;
    GlobalOptions g;
    g.config = config("cascade_device.json");
    g.out_dir = t.path;
    const Run r = run_cmd(Command::cascade, g);
    REQUIRE(r.code == 0);
    const json m = json::parse(slurp(t.path / "manifest.json"));
    CHECK(m["tool"] == "ringfc");
    CHECK(m["command"] == "cascade");
    CHECK(m["config"]["cmm"]["g_rad_s"].get<double>() == 78.5e9);
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    CHECK(m["seed"].is_null());
    REQUIRE(m["artifacts"].is_array());
    CHECK(m["artifacts"].size() >= 2);
    for (const auto& a : m["artifacts"]) {
        const fs::path p = t.path / a["file"].get<std::string>();
        REQUIRE(fs::exists(p));
        CHECK(a["fnv1a"] == hex64(fnv1a(slurp(p))));
    }
    // same inputs, same hash
    TempDir u;
    g.out_dir = u.path;
    REQUIRE(run_cmd(Command::cascade, g).code == 0);
    CHECK(json::parse(slurp(u.path / "manifest.json"))["config_hash"] == m["config_hash"]);
}

TEST_CASE("fnv1a reference values")
{
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("invalid configuration exits 2 and lists every problem")
{
    TempDir t;
    write(t.path / "bad.json", R"({"cmm": {"gamma": 1e10, "gamma_L1_rad_s": -1, "extra_rad_s": 0},
                                   "convert": {"points": 1}, "nonsense": 3})");
    GlobalOptions g;
    g.config = t.path / "bad.json";
    g.out_dir = t.path / "o";
    const Run r = run_cmd(Command::convert, g);
    CHECK(r.code == ExitCode::validation);
    CHECK(r.err.find("cmm.gamma: missing unit suffix") != std::string::npos);
    CHECK(r.err.find("cmm.gamma_L1: must be non-negative") != std::string::npos);
    CHECK(r.err.find("cmm.extra_rad_s: unknown key") != std::string::npos);
    CHECK(r.err.find("nonsense: unknown key") != std::string::npos);
    CHECK(r.err.find("convert.points") != std::string::npos);
    // nothing ran
    CHECK(!fs::exists(t.path / "o" / "manifest.json"));
}

TEST_CASE("malformed JSON and a missing config exit 2")
{
    TempDir t;
    write(t.path / "broken.json", "{\"cmm\": ");
    GlobalOptions g;
    g.out_dir = t.path;
    g.config = t.path / "broken.json";
    CHECK(run_cmd(Command::convert, g).code == ExitCode::validation);
    g.config = t.path / "absent.json";
    const Run r = run_cmd(Command::convert, g);
    CHECK(r.code == ExitCode::validation);
    CHECK(r.err.find("file not found") != std::string::npos);
}

TEST_CASE("a map without resonances exits 3")
{
    TempDir t;
    std::string csv = "wavelength_nm,voltage_V,transmission\n";
    for (double v : {3.5, 4.0, 4.5})
        for (int k = 0; k < 60; ++k) csv += std::to_string(1549.0 + 0.03 * k) + "," + std::to_string(v) + ",0.8\n";
    write(t.path / "flat.csv", csv);
    write(t.path / "fit.json", R"({"fit": {"stage": "linear", "maps": ["flat.csv"]}})");
    GlobalOptions g;
    g.config = t.path / "fit.json";
    g.out_dir = t.path / "o";
    const Run r = run_cmd(Command::fit, g);
    CHECK(r.code == ExitCode::convergence);
    CHECK(!r.err.empty());
}

TEST_CASE("an unwritable output directory exits 4")
{
    TempDir t;
    write(t.path / "file", "x");
    GlobalOptions g;
    g.out_dir = t.path / "file" / "sub";
    CommandOptions o;
    o.ratios = {1};
    CHECK(run_cmd(Command::purity, g, o).code == ExitCode::io);
}

TEST_CASE("pumped fit without idler spectra explains what is missing")
{
    TempDir t;
    write(t.path / "m.csv", "wavelength_nm,voltage_V,transmission\n1550,4,0.5\n1551,4,0.5\n");
    write(t.path / "fit.json", R"({"fit": {"stage": "pumped", "maps": ["m.csv"],
                                   "datasets": [{"map": "m.csv", "signal_power_dbm": -11.6}]}})");
    GlobalOptions g;
    g.config = t.path / "fit.json";
    g.out_dir = t.path;
    const Run r = run_cmd(Command::fit, g);
    CHECK(r.code == ExitCode::validation);
    CHECK(r.err.find("fit.datasets[0].idler") != std::string::npos);
    CHECK(r.err.find("p_iplus_w, p_iminus_w") != std::string::npos);
}

TEST_CASE("shipped configs validate")
{
    for (const auto& e : fs::directory_iterator(RINGFC_CONFIG_DIR)) {
        if (e.path().extension() != ".json") continue;
        const json doc = json::parse(slurp(e.path()));
        const auto c = parse_command(doc["command"].get<std::string>());
        REQUIRE(c);
        GlobalOptions g;
        g.config = e.path();
        const Validation v = validate_config(*c, g);
        // the fit config reads the output of the synth example
        if (*c == Command::fit) continue;
        INFO(e.path().string());
        CHECK(v.config.has_value());
        CHECK(v.issues.empty());
    }
}

TEST_CASE("executable: help, bad subcommand and exit codes")
{
    const std::string cli = RINGFC_CLI;
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status(cli + " --help") == 0);
    CHECK(status(cli + " frobnicate") == 2);
    CHECK(status(cli + " purity --ratio -1") == 2);
    TempDir t;
    CHECK(status(cli + " cascade --config " + config("cascade_device.json").string() + " --out-dir " + t.path.string()) == 0);
    CHECK(fs::exists(t.path / "cascade.csv"));
}
