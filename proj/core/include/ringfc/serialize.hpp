#pragma once

#include "ringfc/cascade.hpp"
#include "ringfc/fit.hpp"
#include "ringfc/jsa.hpp"
#include "ringfc/params.hpp"
#include "ringfc/shaping.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ringfc::io {

using json = nlohmann::json;

// Physical dimension of a config value; decides which key suffixes are accepted.
enum class Dim {
    rate,          // _rad_s, _hz, _mhz, _ghz, _thz (cyclic units get 2 pi)
    rate_per_v2,   // _rad_s_v2
    length,        // _m, _um, _nm
    power,         // _w, _mw, _dbm
    voltage,       // _v
    per_v2,        // _per_v2
    area_per_w,    // _m2_w
    volume,        // _m3, _um3
    dimensionless  // bare key
};

struct Issue {
    std::string field;
    std::string message;
};

// Reads unit-suffixed keys from one JSON object and collects every problem instead of stopping.
class Reader {
public:
    Reader(const json& obj, std::string path, std::vector<Issue>& issues);

    std::optional<double> get(const std::string& base, Dim d);
    double get_or(const std::string& base, Dim d, double fallback);
    double required(const std::string& base, Dim d);
    std::optional<double> non_negative(const std::string& base, Dim d);
    // Array of numbers under base + suffix; a scalar is accepted as a one-element list.
    std::optional<std::vector<double>> list(const std::string& base, Dim d);
    std::optional<long> integer(const std::string& key);
    std::optional<bool> flag(const std::string& key);
    std::optional<std::string> text(const std::string& key);
    std::optional<json> object(const std::string& key);
    void issue(const std::string& field, const std::string& message);
    // Flags keys that were never read.
    void finish();

private:
    const json& obj_;
    std::string path_;
    std::vector<Issue>& issues_;
    std::set<std::string> used_;
};

std::string format_issues(const std::vector<Issue>& issues);

CmmParams cmm_from_json(const json& j, std::vector<Issue>& issues, const std::string& path = "cmm");
FdmGeometry fdm_from_json(const json& j, std::vector<Issue>& issues, const std::string& path = "fdm");
PumpConfig pump_from_json(const json& j, std::vector<Issue>& issues, const std::string& path = "pump");

json to_json(const CmmParams& p);
json to_json(const FdmGeometry& g);
json to_json(const PumpConfig& p);
json to_json(const fit::CmmMapModel& m);
json to_json(const fit::FitResult& r);
json to_json(const cascade::CascadeReport& r);
json to_json(const jsa::PurityPoint& p);
json to_json(const shaping::SweepCell& c);

// Strict variants that throw ConfigError listing all issues.
CmmParams cmm_from_json(const json& j);
FdmGeometry fdm_from_json(const json& j);

} // namespace ringfc::io
