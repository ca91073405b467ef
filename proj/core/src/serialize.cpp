#include "ringfc/serialize.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/units.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace ringfc::io {

namespace {

struct Suffix {
    const char* text;
    double scale;
    bool dbm;
};

std::vector<Suffix> suffixes(Dim d)
{
    switch (d) {
    case Dim::rate:
        return {{"_rad_s", 1.0, false}, {"_hz", 2.0 * kPi, false}, {"_mhz", 2.0 * kPi * 1e6, false},
                {"_ghz", 2.0 * kPi * 1e9, false}, {"_thz", 2.0 * kPi * 1e12, false}};
    case Dim::rate_per_v2: return {{"_rad_s_v2", 1.0, false}};
    case Dim::length: return {{"_m", 1.0, false}, {"_um", 1e-6, false}, {"_nm", 1e-9, false}};
    case Dim::power: return {{"_w", 1.0, false}, {"_mw", 1e-3, false}, {"_dbm", 0.0, true}};
    case Dim::voltage: return {{"_v", 1.0, false}};
    case Dim::per_v2: return {{"_per_v2", 1.0, false}};
    case Dim::area_per_w: return {{"_m2_w", 1.0, false}};
    case Dim::volume: return {{"_m3", 1.0, false}, {"_um3", 1e-18, false}};
    case Dim::dimensionless: return {{"", 1.0, false}};
    }
    return {};
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

} // namespace

Reader::Reader(const json& obj, std::string path, std::vector<Issue>& issues)
    : obj_(obj), path_(std::move(path)), issues_(issues)
{
    if (!obj_.is_object()) issues_.push_back({path_, "expected a JSON object"});
}

void Reader::issue(const std::string& field, const std::string& message) { issues_.push_back({join(path_, field), message}); }

std::optional<double> Reader::get(const std::string& base, Dim d)
{
    if (!obj_.is_object()) return std::nullopt;
    std::optional<double> out;
    std::string found;
    for (const Suffix& s : suffixes(d)) {
        const std::string key = base + s.text;
        auto it = obj_.find(key);
        if (it == obj_.end()) continue;
        used_.insert(key);
        if (!found.empty()) {
            issue(key, "given twice (also as " + found + ")");
            continue;
        }
        found = key;
        if (!it->is_number()) {
            issue(key, "must be a number");
            continue;
        }
        const double v = it->get<double>();
        if (!std::isfinite(v)) {
            issue(key, "must be finite");
            continue;
        }
        out = s.dbm ? dbm_to_watts(v) : v * s.scale;
    }
    if (d != Dim::dimensionless && obj_.contains(base)) {
        used_.insert(base);
        issue(base, "missing unit suffix (accepted: " + [&] {
            std::string a;
            for (const Suffix& s : suffixes(d)) a += (a.empty() ? "" : ", ") + base + s.text;
            return a;
        }() + ")");
    }
    return out;
}

double Reader::get_or(const std::string& base, Dim d, double fallback) { return get(base, d).value_or(fallback); }

double Reader::required(const std::string& base, Dim d)
{
    auto v = get(base, d);
    if (!v) {
        issue(base + suffixes(d).front().text, "required");
        return 0.0;
    }
    return *v;
}

std::optional<double> Reader::non_negative(const std::string& base, Dim d)
{
    auto v = get(base, d);
    if (v && *v < 0.0) {
        issue(base, "must be non-negative");
        return std::nullopt;
    }
    return v;
}

std::optional<std::vector<double>> Reader::list(const std::string& base, Dim d)
{
    if (!obj_.is_object()) return std::nullopt;
    for (const Suffix& s : suffixes(d)) {
        const std::string key = base + s.text;
        auto it = obj_.find(key);
        if (it == obj_.end()) continue;
        used_.insert(key);
        const json arr = it->is_array() ? *it : json::array({*it});
        std::vector<double> out;
        for (const auto& e : arr) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                issue(key, "entries must be finite numbers");
                return std::nullopt;
            }
            out.push_back(s.dbm ? dbm_to_watts(e.get<double>()) : e.get<double>() * s.scale);
        }
        if (out.empty()) {
            issue(key, "must not be empty");
            return std::nullopt;
        }
        return out;
    }
    if (d != Dim::dimensionless && obj_.contains(base)) {
        used_.insert(base);
        issue(base, "missing unit suffix");
    }
    return std::nullopt;
}

std::optional<long> Reader::integer(const std::string& key)
{
    if (!obj_.is_object() || !obj_.contains(key)) return std::nullopt;
    used_.insert(key);
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) {
        issue(key, "must be an integer");
        return std::nullopt;
    }
    return v.get<long>();
}

std::optional<bool> Reader::flag(const std::string& key)
{
    if (!obj_.is_object() || !obj_.contains(key)) return std::nullopt;
    used_.insert(key);
    if (!obj_.at(key).is_boolean()) {
        issue(key, "must be true or false");
        return std::nullopt;
    }
    return obj_.at(key).get<bool>();
}

std::optional<std::string> Reader::text(const std::string& key)
{
    if (!obj_.is_object() || !obj_.contains(key)) return std::nullopt;
    used_.insert(key);
    if (!obj_[key].is_string()) {
        issue(key, "must be a string");
        return std::nullopt;
    }
    return obj_[key].get<std::string>();
}

std::optional<json> Reader::object(const std::string& key)
{
    if (!obj_.is_object() || !obj_.contains(key)) return std::nullopt;
    used_.insert(key);
    return std::optional<json>(std::in_place, obj_.at(key));
}

void Reader::finish()
{
    if (!obj_.is_object()) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
        if (!used_.count(it.key())) issue(it.key(), "unknown key");
}

std::string format_issues(const std::vector<Issue>& issues)
{
    std::ostringstream os;
    for (const auto& i : issues) os << i.field << ": " << i.message << "\n";
    return os.str();
}

// ---------------------------------------------------------------- parameters

CmmParams cmm_from_json(const json& j, std::vector<Issue>& issues, const std::string& path)
{
    Reader r(j, path, issues);
    CmmParams p;
    p.gamma = r.non_negative("gamma", Dim::rate).value_or(0.0);
    p.gamma_L1 = r.non_negative("gamma_L1", Dim::rate).value_or(0.0);
    p.gamma_L2 = r.non_negative("gamma_L2", Dim::rate).value_or(0.0);
    p.gamma_FCA = r.non_negative("gamma_FCA", Dim::rate).value_or(0.0);
    p.g = r.non_negative("g", Dim::rate).value_or(0.0);
    p.delta_ab = r.get_or("delta_ab", Dim::rate, 0.0);
    p.delta_NL = r.get_or("delta_NL", Dim::rate, 0.0);
    p.chi_bar = r.non_negative("chi_bar", Dim::rate).value_or(0.0);
    p.gamma_s = r.non_negative("gamma_s", Dim::rate);
    p.gamma_i_plus = r.non_negative("gamma_i_plus", Dim::rate);
    p.gamma_i_minus = r.non_negative("gamma_i_minus", Dim::rate);
    p.gamma_o = r.non_negative("gamma_o", Dim::rate);
    r.finish();
    return p;
}

FdmGeometry fdm_from_json(const json& j, std::vector<Issue>& issues, const std::string& path)
{
    Reader r(j, path, issues);
    FdmGeometry g;
    g.L1 = r.required("L1", Dim::length);
    g.L2 = r.required("L2", Dim::length);
    g.nu1 = r.get_or("nu1", Dim::dimensionless, 1.0);
    g.nu2 = r.get_or("nu2", Dim::dimensionless, 1.0);
    g.theta1 = r.get_or("theta1", Dim::dimensionless, 0.0);
    g.theta2 = r.get_or("theta2", Dim::dimensionless, 0.0);
    g.n_eff_re = r.required("n_eff_re", Dim::dimensionless);
    g.n_eff_im = r.get_or("n_eff_im", Dim::dimensionless, 0.0);
    g.n_g = r.required("n_g", Dim::dimensionless);
    if (auto w = r.get("omega_ref", Dim::rate)) g.omega_ref = *w;
    if (auto l = r.get("lambda_ref", Dim::length)) {
        if (g.omega_ref > 0.0) r.issue("lambda_ref", "give either omega_ref or lambda_ref");
        else if (*l > 0.0) g.omega_ref = omega_from_wavelength(*l);
    }
    if (!(g.omega_ref > 0.0)) g.omega_ref = omega_from_wavelength(kTelecomWavelength);
    g.heater_A = r.get_or("heater_A", Dim::rate, 0.0);
    g.heater_B = r.get_or("heater_B", Dim::rate_per_v2, 0.0);
    g.dnV = r.get_or("dnV", Dim::per_v2, 0.0);
    if (auto m = r.object("mzi")) {
        Reader rm(*m, path + ".mzi", issues);
        MziConfig z;
        z.nu = rm.get_or("nu", Dim::dimensionless, 1.0);
        z.psi = rm.get_or("psi", Dim::dimensionless, 0.0);
        z.psi_R = rm.get_or("psi_R", Dim::dimensionless, 0.0);
        z.asymmetry = rm.get_or("asymmetry", Dim::dimensionless, 0.0);
        z.delta_L = rm.get_or("delta_L", Dim::length, 0.0);
        rm.finish();
        g.mzi = z;
    }
    r.finish();
    try {
        g.validate();
    } catch (const DomainError& e) {
        issues.push_back({path, e.what()});
    }
    return g;
}

PumpConfig pump_from_json(const json& j, std::vector<Issue>& issues, const std::string& path)
{
    Reader r(j, path, issues);
    PumpConfig p;
    p.P_p1 = r.non_negative("P_p1", Dim::power).value_or(0.0);
    p.P_p2 = r.non_negative("P_p2", Dim::power).value_or(0.0);
    p.P_s = r.non_negative("P_s", Dim::power).value_or(0.0);
    p.T_cpl = r.get_or("T_cpl", Dim::dimensionless, 1.0);
    p.n2 = r.get_or("n2", Dim::area_per_w, p.n2);
    p.V_ring = r.get_or("V_ring", Dim::volume, 0.0);
    r.finish();
    if (p.T_cpl <= 0.0 || p.T_cpl > 1.0) issues.push_back({path + ".T_cpl", "must lie in (0, 1]"});
    return p;
}

CmmParams cmm_from_json(const json& j)
{
    std::vector<Issue> issues;
    CmmParams p = cmm_from_json(j, issues);
    if (!issues.empty()) throw ConfigError(format_issues(issues));
    return p;
}

FdmGeometry fdm_from_json(const json& j)
{
    std::vector<Issue> issues;
    FdmGeometry g = fdm_from_json(j, issues);
    if (!issues.empty()) throw ConfigError(format_issues(issues));
    return g;
}

json to_json(const CmmParams& p)
{
    json j{{"gamma_rad_s", p.gamma},       {"gamma_L1_rad_s", p.gamma_L1}, {"gamma_L2_rad_s", p.gamma_L2},
           {"gamma_FCA_rad_s", p.gamma_FCA}, {"g_rad_s", p.g},             {"delta_ab_rad_s", p.delta_ab},
           {"delta_NL_rad_s", p.delta_NL}, {"chi_bar_rad_s", p.chi_bar}};
    if (p.gamma_s) j["gamma_s_rad_s"] = *p.gamma_s;
    if (p.gamma_i_plus) j["gamma_i_plus_rad_s"] = *p.gamma_i_plus;
    if (p.gamma_i_minus) j["gamma_i_minus_rad_s"] = *p.gamma_i_minus;
    if (p.gamma_o) j["gamma_o_rad_s"] = *p.gamma_o;
    return j;
}

json to_json(const FdmGeometry& g)
{
    json j{{"L1_m", g.L1},         {"L2_m", g.L2},          {"nu1", g.nu1},
           {"nu2", g.nu2},         {"theta1", g.theta1},    {"theta2", g.theta2},
           {"n_eff_re", g.n_eff_re}, {"n_eff_im", g.n_eff_im}, {"n_g", g.n_g},
           {"omega_ref_rad_s", g.omega_ref}, {"heater_A_rad_s", g.heater_A}, {"heater_B_rad_s_v2", g.heater_B},
           {"dnV_per_v2", g.dnV}};
    if (g.mzi)
        j["mzi"] = {{"nu", g.mzi->nu}, {"psi", g.mzi->psi}, {"psi_R", g.mzi->psi_R},
                    {"asymmetry", g.mzi->asymmetry}, {"delta_L_m", g.mzi->delta_L}};
    return j;
}

json to_json(const PumpConfig& p)
{
    return {{"P_p1_w", p.P_p1}, {"P_p2_w", p.P_p2}, {"P_s_w", p.P_s}, {"T_cpl", p.T_cpl}, {"n2_m2_w", p.n2}, {"V_ring_m3", p.V_ring}};
}

json to_json(const fit::CmmMapModel& m)
{
    return {{"rates", to_json(m.rates)},
            {"A_rad_s", m.A},
            {"B_rad_s_v2", m.B},
            {"omega_b_rad_s", m.omega_b},
            {"offset_s_rad_s", m.offset_s},
            {"offset_ip_rad_s", m.offset_ip},
            {"T_cpl", m.T_cpl}};
}

json to_json(const fit::FitResult& r)
{
    json params = json::array();
    for (const auto& p : r.parameters) {
        json e{{"name", p.name}, {"value", p.value}};
        e["uncertainty"] = std::isfinite(p.uncertainty) ? json(p.uncertainty) : json(nullptr);
        params.push_back(e);
    }
    json j{{"stage", fit::stage_name(r.stage)},
           {"parameters", params},
           {"residual_norm", r.residual_norm},
           {"delta_nl_rad_s", r.delta_nl},
           {"dataset_ids", r.dataset_ids},
           {"cost_history", r.cost_history},
           {"iterations", r.iterations},
           {"evaluations", r.evaluations},
           {"n_residuals", r.n_residuals},
           {"warnings", r.warnings},
           {"T_cpl", r.T_cpl}};
    if (r.cmm) j["model"] = to_json(*r.cmm);
    if (r.fdm) j["geometry"] = to_json(*r.fdm);
    return j;
}

json to_json(const cascade::CascadeReport& r)
{
    json j{{"G", r.G}, {"chi_bar_rad_s", r.chi_bar}, {"eta_max", r.eta_max}};
    j["zeta_db"] = std::isfinite(r.zeta_db) ? json(r.zeta_db) : json("inf");
    return j;
}

json to_json(const jsa::PurityPoint& p)
{
    return {{"ratio", p.ratio}, {"purity", p.purity}, {"n_grid", p.n_grid}, {"last_change", p.last_change}, {"lambda_top", p.lambda_top}};
}

json to_json(const shaping::SweepCell& c)
{
    json j{{"G", c.G}, {"QL_Qo", c.ql_over_qo}, {"evaluations", c.evaluations}};
    if (c.best)
        j["best"] = {{"eta_out", c.best->eta_out}, {"overlap", c.best->overlap}, {"dw_over_gamma", c.best->dw_over_gamma},
                     {"tau_on_over_dt", c.best->tau_on_over_dt}, {"beta", c.best->beta}};
    else
        j["best"] = nullptr;
    return j;
}

} // namespace ringfc::io
