#include "ringfc_app/app.hpp"
#include "ringfc_app/csv.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace ringfc::app;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string first_line(const fs::path& p)
{
    std::ifstream f(p);
    std::string s;
    std::getline(f, s);
    return s;
}

std::string joined(const std::vector<std::string>& cols)
{
    std::string s;
    for (const auto& c : cols) s += (s.empty() ? "" : ",") + c;
    return s;
}

struct Scratch {
    fs::path path;
    Scratch()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("ringfc_golden_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~Scratch()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run_in(Command c, const fs::path& cfg, const fs::path& out, CommandOptions o = {})
{
    GlobalOptions g;
    g.config = cfg;
    g.out_dir = out;
    std::ostringstream so, se;
    const int rc = run_main(c, g, o, so, se);
    if (rc != 0) MESSAGE(se.str());
    return rc;
}

} // namespace

TEST_CASE("schema listing matches the golden file")
{
    CHECK(describe_schemas() == slurp(fs::path(RINGFC_GOLDEN_DIR) / "csv_schemas.txt"));
}

TEST_CASE("written CSV headers follow the schemas")
{
    Scratch s;
    const fs::path cfg = RINGFC_CONFIG_DIR;
    auto cfg_file = [&](const std::string& name, const std::string& body) {
        const fs::path p = s.path / name;
        std::ofstream(p) << body;
        return p;
    };

    REQUIRE(run_in(Command::cascade, cfg / "cascade_device.json", s.path) == 0);
    CHECK(first_line(s.path / "cascade.csv") == joined(csv_schema("cascade")));

    const fs::path conv = cfg_file("convert.json", R"({"cmm": {"gamma_rad_s": 27.4e9, "gamma_L1_rad_s": 10.9e9,
        "gamma_L2_rad_s": 8.02e9, "g_rad_s": 78.5e9, "chi_bar_rad_s": 1e9}, "convert": {"points": 11}})");
    REQUIRE(run_in(Command::convert, conv, s.path) == 0);
    CHECK(first_line(s.path / "convert.csv") == joined(csv_schema("convert")));

    CommandOptions o;
    o.ratios = {1};
    REQUIRE(run_in(Command::purity, {}, s.path, o) == 0);
    CHECK(first_line(s.path / "purity.csv") == joined(csv_schema("purity")));

    REQUIRE(run_in(Command::shape, cfg / "shape_g100.json", s.path) == 0);
    CHECK(first_line(s.path / "control.csv") == joined(csv_schema("control")));
    CHECK(first_line(s.path / "emission.csv") == joined(csv_schema("emission")));

    const fs::path sw = cfg_file("sweep.json", R"({"sweep": {"G": [30], "ql_over_qo": [300], "max_evaluations": 20}})");
    REQUIRE(run_in(Command::sweep, sw, s.path) == 0);
    CHECK(first_line(s.path / "sweep.csv") == joined(csv_schema("sweep")));

    const fs::path sp = cfg_file("spectrum.json", R"({"fdm": {"L1_um": 324, "L2_um": 81, "nu1": 0.93, "nu2": 0.98,
        "n_eff_re": 2.618, "n_g": 4.73}, "spectrum": {"lambda_min_nm": 1549, "lambda_max_nm": 1551, "points": 50, "voltages_v": [4.0]}})");
    REQUIRE(run_in(Command::spectrum, sp, s.path) == 0);
    CHECK(first_line(s.path / "spectrum.csv") == joined(csv_schema("spectrum")));

    REQUIRE(run_in(Command::synth, cfg / "synth_linear.json", s.path) == 0);
    CHECK(first_line(s.path / "map.csv") == joined(csv_schema("map")));
    const fs::path ft = cfg_file("fit.json", R"({"fit": {"stage": "linear", "maps": ["map.csv"]}})");
    REQUIRE(run_in(Command::fit, ft, s.path) == 0);
    CHECK(first_line(s.path / "fit_linear_cost.csv") == joined(csv_schema("fit_cost")));

    const fs::path pu = cfg_file("pumped.json", R"({"cmm": {"gamma_rad_s": 27.4e9, "gamma_L1_rad_s": 10.9e9,
        "gamma_L2_rad_s": 8.02e9, "g_rad_s": 78.5e9, "gamma_FCA_rad_s": 10e9, "chi_bar_rad_s": 1.09e9},
        "synth": {"model": "pumped", "lambda_min_nm": 1546.1, "lambda_max_nm": 1550.83, "points": 200, "voltages_v": [4.1], "delta_nl_rad_s": [0],
        "signal_power_dbm": -11.6, "offset_s_rad_s": 1.2291e12, "offset_ip_rad_s": 2.4582e12}})");
    REQUIRE(run_in(Command::synth, pu, s.path) == 0);
    CHECK(first_line(s.path / "idler.csv") == joined(csv_schema("idler")));
}

TEST_CASE("unknown schema is an error")
{
    CHECK_THROWS(csv_schema("nope"));
}
