#include "ringfc_app/app.hpp"

#include "ringfc/cascade.hpp"
#include "ringfc/cmm.hpp"
#include "ringfc/fdm.hpp"
#include "ringfc/fit.hpp"
#include "ringfc/jsa.hpp"
#include "ringfc/shaping.hpp"
#include "ringfc/units.hpp"
#include "ringfc_app/csv.hpp"
#include "ringfc_app/errors.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#ifndef RINGFC_VERSION
#define RINGFC_VERSION "0.0.0"
#endif

namespace ringfc::app {

namespace fs = std::filesystem;
using io::Dim;
using io::Issue;
using io::Reader;
using nlohmann::json;

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> n{"spectrum", "convert", "design", "cascade", "purity", "shape", "sweep", "fit", "synth"};
    return n;
}

std::optional<Command> parse_command(std::string_view name)
{
    const auto& n = command_names();
    for (std::size_t k = 0; k < n.size(); ++k)
        if (n[k] == name) return static_cast<Command>(k);
    return std::nullopt;
}

std::string command_name(Command c) { return command_names()[static_cast<std::size_t>(c)]; }

std::uint64_t fnv1a(std::string_view data)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const IoError*>(&e)) return ExitCode::io;
    if (dynamic_cast<const ConvergenceError*>(&e)) return ExitCode::convergence;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) || dynamic_cast<const DataError*>(&e))
        return ExitCode::validation;
    return ExitCode::other;
}

namespace {

// ---------------------------------------------------------------- plumbing

struct Context {
    const RunConfig& cfg;
    std::vector<Issue>& issues;
    bool dry;
    RunReport* report = nullptr;

    fs::path out(const std::string& name) const
    {
        report->artifacts.push_back(cfg.global.out_dir / name);
        return cfg.global.out_dir / name;
    }
    fs::path input(const std::string& p) const
    {
        fs::path q(p);
        return q.is_absolute() ? q : cfg.base_dir / q;
    }
    void write_json(const std::string& name, const json& j) const
    {
        std::ofstream f(out(name), std::ios::binary);
        if (!f) throw IoError("cannot write " + (cfg.global.out_dir / name).string());
        f << j.dump(2) << "\n";
    }
};

const json& section(const json& doc, const std::string& key)
{
    static const json empty = json::object();
    auto it = doc.find(key);
    return it == doc.end() ? empty : *it;
}

std::optional<CmmParams> need_cmm(Context& c)
{
    if (!c.cfg.doc.contains("cmm")) {
        c.issues.push_back({"cmm", "section required"});
        return std::nullopt;
    }
    const std::size_t before = c.issues.size();
    CmmParams p = io::cmm_from_json(c.cfg.doc["cmm"], c.issues);
    if (c.issues.size() != before) return std::nullopt;
    try {
        p.validate();
    } catch (const DomainError& e) {
        c.issues.push_back({"cmm", e.what()});
        return std::nullopt;
    }
    return p;
}

std::optional<FdmGeometry> need_fdm(Context& c)
{
    if (!c.cfg.doc.contains("fdm")) {
        c.issues.push_back({"fdm", "section required"});
        return std::nullopt;
    }
    const std::size_t before = c.issues.size();
    FdmGeometry g = io::fdm_from_json(c.cfg.doc["fdm"], c.issues);
    if (c.issues.size() != before) return std::nullopt;
    return g;
}

std::size_t points(Reader& r, const std::string& key, long fallback, long min = 2)
{
    const long n = r.integer(key).value_or(fallback);
    if (n < min) {
        r.issue(key, "must be at least " + std::to_string(min));
        return static_cast<std::size_t>(min);
    }
    return static_cast<std::size_t>(n);
}

std::vector<double> linspace(double a, double b, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    return v;
}

void positive(Reader& r, const std::string& key, double v)
{
    if (!(v > 0.0)) r.issue(key, "must be positive");
}

struct WavelengthGrid {
    std::vector<double> nm;
};

WavelengthGrid wavelength_grid(Reader& r)
{
    const double lo = r.required("lambda_min", Dim::length);
    const double hi = r.required("lambda_max", Dim::length);
    const std::size_t n = points(r, "points", 2001);
    if (lo > 0.0 && hi > 0.0 && !(hi > lo)) r.issue("lambda_max", "must exceed lambda_min");
    return {linspace(lo * 1e9, hi * 1e9, n)};
}

std::vector<double> voltages(Reader& r)
{
    auto v = r.list("voltages", Dim::voltage).value_or(std::vector<double>{0.0});
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] > v[k - 1])) {
            r.issue("voltages_v", "must be strictly increasing");
            break;
        }
    return v;
}

// ---------------------------------------------------------------- commands

void cmd_spectrum(Context& c)
{
    Reader r(section(c.cfg.doc, "spectrum"), "spectrum", c.issues);
    const WavelengthGrid grid = wavelength_grid(r);
    const std::vector<double> V = voltages(r);
    const double T = r.get_or("T_cpl", Dim::dimensionless, 1.0);
    r.finish();
    auto g = need_fdm(c);
    if (c.dry || !g) return;

    const MeasuredMap m = fdm::transmission_map(*g, grid.nm, V, T);
    const std::vector<double> w = m.omega_grid();
    if (auto warn = fdm::span_warning(*g, w.back(), w.front())) c.report->warnings.push_back(*warn);
    CsvWriter out(c.out("spectrum.csv"), "spectrum");
    for (std::size_t i = 0; i < V.size(); ++i)
        for (std::size_t j = 0; j < w.size(); ++j) {
            out << V[i] << grid.nm[j] << w[j] << m.transmission(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            out.end_row();
        }
    out.close();
    c.report->summary["points"] = V.size() * w.size();
}

void cmd_convert(Context& c)
{
    auto p = need_cmm(c);
    Reader r(section(c.cfg.doc, "convert"), "convert", c.issues);
    const double span = p ? 5.0 * p->total_s() : 0.0;
    const double wmin = r.get_or("omega_min", Dim::rate, -span);
    const double wmax = r.get_or("omega_max", Dim::rate, span);
    const std::size_t n = points(r, "points", 801);
    const double d0 = p ? p->delta_ab : 0.0;
    const double dmin = r.get_or("delta_ab_min", Dim::rate, d0);
    const double dmax = r.get_or("delta_ab_max", Dim::rate, d0);
    const std::size_t nd = points(r, "delta_ab_points", dmin == dmax ? 1 : 41, 1);
    const double T = r.get_or("T_cpl", Dim::dimensionless, 1.0);
    const std::string model = r.text("signal_model").value_or("depleted");
    if (model != "depleted" && model != "undepleted") r.issue("signal_model", "must be depleted or undepleted");
    if (!(wmax > wmin)) r.issue("omega_max_rad_s", "must exceed omega_min_rad_s");
    if (dmax < dmin) r.issue("delta_ab_max_rad_s", "must not be below delta_ab_min_rad_s");
    r.finish();
    if (c.dry || !p) return;

    const SignalModel sm = model == "depleted" ? SignalModel::depleted : SignalModel::undepleted;
    const std::vector<double> grid = linspace(wmin, wmax, n);
    CsvWriter out(c.out("convert.csv"), "convert");
    double peak = -std::numeric_limits<double>::infinity(), peak_w = 0.0, peak_d = 0.0;
    for (double d : linspace(dmin, dmax, nd)) {
        CmmParams q = *p;
        q.delta_ab = d;
        const auto resp = transmission_spectra(q, T, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Conversion cv = conversion_efficiency(q, grid[k], sm);
            const double zdb = resp[k].zeta.power_db();
            if (zdb > peak) {
                peak = zdb;
                peak_w = grid[k];
                peak_d = d;
            }
            out << d << grid[k] << std::norm(resp[k].t_s) << std::norm(resp[k].t_i_plus) << std::norm(resp[k].t_i_minus)
                << cv.eta_i_plus << cv.eta_i_minus << zdb;
            out.end_row();
        }
    }
    out.close();
    const MaxConversion mc = max_conversion(*p);
    json s{{"peak_zeta_db", std::isfinite(peak) ? json(peak) : json("inf")},
           {"peak_omega_rad_s", peak_w},
           {"peak_delta_ab_rad_s", peak_d},
           {"G", normalized_coupling(*p)},
           {"eta_max", mc.eta_max},
           {"chi_max_rad_s", mc.chi_max},
           {"signal_model", model}};
    c.write_json("convert.json", s);
    c.report->summary = s;
}

void cmd_design(Context& c)
{
    Reader r(section(c.cfg.doc, "design"), "design", c.issues);
    fdm::RateDesign d;
    d.L1 = r.required("L1", Dim::length);
    d.L2 = r.required("L2", Dim::length);
    d.n_g = r.required("n_g", Dim::dimensionless);
    d.n_eff_guess = r.required("n_eff_guess", Dim::dimensionless);
    d.omega = omega_from_wavelength(r.get_or("lambda", Dim::length, kTelecomWavelength));
    d.gamma1 = r.required("gamma1", Dim::rate);
    d.gamma2 = r.required("gamma2", Dim::rate);
    d.gamma_L = r.non_negative("gamma_L", Dim::rate).value_or(0.0);
    for (auto [k, v] : {std::pair{"L1_m", d.L1}, {"L2_m", d.L2}, {"n_g", d.n_g}, {"gamma1_rad_s", d.gamma1}, {"gamma2_rad_s", d.gamma2}})
        positive(r, k, v);
    r.finish();
    if (c.dry) return;

    const FdmGeometry g = fdm::geometry_from_rates(d);
    json s{{"geometry", io::to_json(g)}, {"fsr1_rad_s", g.fsr1()}, {"fsr2_rad_s", g.fsr2()}};
    try {
        const Splitting sp = ring_splitting(g, d.gamma1);
        CmmParams cm;
        cm.gamma = d.gamma1;
        cm.gamma_L1 = d.gamma_L;
        cm.gamma_L2 = d.gamma_L;
        cm.g = sp.g;
        s["g_rad_s"] = sp.g;
        s["splitting_rad_s"] = sp.delta_omega;
        s["G"] = normalized_coupling(cm);
        s["G_ring2"] = d.gamma_L > 0.0 ? json(sp.g / std::sqrt(d.gamma_L * (d.gamma2 + d.gamma_L))) : json("inf");
    } catch (const NoSplittingError& e) {
        c.report->warnings.push_back(e.what());
    }
    c.write_json("design.json", s);
    c.report->summary = s;
}

void cmd_cascade(Context& c)
{
    auto p = need_cmm(c);
    Reader r(section(c.cfg.doc, "cascade"), "cascade", c.issues);
    const double cmin = r.non_negative("chi_min", Dim::rate).value_or(0.0);
    const double cmax = r.get_or("chi_max", Dim::rate, p ? p->total_i_plus() : 1.0);
    const std::size_t n = points(r, "points", 201);
    const bool large = r.flag("large_extinction").value_or(true);
    if (!(cmax > cmin)) r.issue("chi_max_rad_s", "must exceed chi_min_rad_s");
    r.finish();
    if (c.dry || !p) return;

    const cascade::CascadeParams cp{*p};
    CsvWriter out(c.out("cascade.csv"), "cascade");
    for (double chi : linspace(cmin, cmax, n)) {
        CmmParams q = *p;
        q.chi_bar = chi;
        q.delta_ab = 0.0;
        q.delta_NL = 0.0;
        out << chi << cascade::cascade_up_conversion(cp, chi) << conversion_efficiency(q, 0.0).eta_i_plus;
        out.end_row();
    }
    out.close();
    const auto rep = cascade::cascade_report(cp);
    const auto mx = cascade::cascade_max_efficiency(cp, large);
    json s = io::to_json(rep);
    s["search_eta_max"] = mx.eta_max;
    s["search_chi_max_rad_s"] = mx.chi_max;
    s["large_extinction"] = large;
    c.write_json("cascade.json", s);
    c.report->summary = s;
}

void cmd_purity(Context& c)
{
    Reader r(section(c.cfg.doc, "purity"), "purity", c.issues);
    std::vector<double> ratios = r.list("ratios", Dim::dimensionless).value_or(std::vector<double>{1, 3, 10, 30, 100});
    jsa::PurityOptions opt;
    opt.n_start = points(r, "n_start", static_cast<long>(opt.n_start), 16);
    opt.max_refinements = static_cast<int>(r.integer("max_refinements").value_or(opt.max_refinements));
    opt.tolerance = r.get_or("tolerance", Dim::dimensionless, opt.tolerance);
    opt.top = points(r, "top", static_cast<long>(opt.top), 1);
    r.finish();
    if (!c.cfg.options.ratios.empty()) ratios = c.cfg.options.ratios;
    if (c.cfg.global.tolerance) opt.tolerance = *c.cfg.global.tolerance;
    for (double x : ratios)
        if (!(x > 0.0)) c.issues.push_back({"purity.ratios", "ratios must be positive"});
    if (!(opt.tolerance > 0.0)) c.issues.push_back({"purity.tolerance", "must be positive"});
    if (c.dry) return;

    const auto pts = jsa::purity_sweep(ratios, opt, c.cfg.global.jobs);
    CsvWriter out(c.out("purity.csv"), "purity");
    json arr = json::array();
    for (const auto& p : pts) {
        out << p.ratio << p.purity << static_cast<double>(p.n_grid) << p.last_change;
        out.end_row();
        arr.push_back(io::to_json(p));
    }
    out.close();
    json s{{"points", arr}};
    if (pts.size() == 1) {
        s["ratio"] = pts[0].ratio;
        s["purity"] = pts[0].purity;
    }
    c.write_json("purity.json", s);
    c.report->summary = s;
}

shaping::EmissionDesign read_design(Reader& r)
{
    shaping::EmissionDesign d;
    d.gamma_o = r.get_or("gamma_o", Dim::rate, d.gamma_o);
    d.G = r.get_or("G", Dim::dimensionless, d.G);
    d.ql_over_qo = r.get_or("ql_over_qo", Dim::dimensionless, d.ql_over_qo);
    d.dw_over_gamma = r.get_or("dw_over_gamma", Dim::dimensionless, d.dw_over_gamma);
    d.t0_over_dt = r.get_or("t0_over_dt", Dim::dimensionless, d.t0_over_dt);
    d.tau_on_over_dt = r.get_or("tau_on_over_dt", Dim::dimensionless, d.tau_on_over_dt);
    d.tau_off_over_dt = r.get("tau_off_over_dt", Dim::dimensionless);
    d.tau_env_over_dt = r.get("tau_env_over_dt", Dim::dimensionless);
    d.beta = r.get_or("beta", Dim::dimensionless, 1.0);
    positive(r, "gamma_o_rad_s", d.gamma_o);
    positive(r, "ql_over_qo", d.ql_over_qo);
    positive(r, "dw_over_gamma", d.dw_over_gamma);
    if (d.G < 0.0) r.issue("G", "must be non-negative");
    return d;
}

void cmd_shape(Context& c)
{
    Reader r(section(c.cfg.doc, "shape"), "shape", c.issues);
    const shaping::EmissionDesign d = read_design(r);
    shaping::EmissionOptions opt;
    opt.signal_leak = r.non_negative("signal_leak", Dim::rate).value_or(0.0);
    opt.down_converted_mode = r.flag("down_converted_mode").value_or(true);
    r.finish();
    if (c.cfg.global.tolerance) opt.rel_tol = *c.cfg.global.tolerance;
    if (c.dry) return;

    const shaping::ControlPulse chi = d.control();
    CsvWriter cw(c.out("control.csv"), "control");
    const auto samples = chi.samples();
    for (std::size_t k = 0; k < chi.time().size(); ++k) {
        cw << chi.time()[k] << samples[k].real() << samples[k].imag() << std::abs(samples[k]);
        cw.end_row();
    }
    cw.close();

    const shaping::EmissionResult e = shaping::evaluate_design(d, opt);
    CsvWriter ew(c.out("emission.csv"), "emission");
    for (std::size_t k = 0; k < e.t.size(); ++k) {
        ew << e.t[k] << e.chi[k].real() << e.S_out[k].real() << e.S_out[k].imag() << e.occ_s[k] << e.occ_o[k] << e.occ_minus[k] << e.occ_B[k];
        ew.end_row();
    }
    ew.close();
    json s{{"eta_out", e.eta_out},
           {"overlap", e.overlap},
           {"eta_down", e.eta_down},
           {"final_population", e.final_population()},
           {"validity_end_s", chi.validity_end()},
           {"tau_on_s", chi.tau_on()},
           {"tau_off_s", chi.tau_off()}};
    c.write_json("shape.json", s);
    c.report->summary = s;
}

void cmd_sweep(Context& c)
{
    Reader r(section(c.cfg.doc, "sweep"), "sweep", c.issues);
    const auto G = r.list("G", Dim::dimensionless).value_or(std::vector<double>{100.0});
    const auto Q = r.list("ql_over_qo", Dim::dimensionless).value_or(std::vector<double>{1000.0});
    shaping::SweepOptions opt;
    opt.ol_floor = r.get_or("ol_floor", Dim::dimensionless, opt.ol_floor);
    opt.t0_over_dt = r.get_or("t0_over_dt", Dim::dimensionless, opt.t0_over_dt);
    opt.max_evaluations = static_cast<int>(points(r, "max_evaluations", opt.max_evaluations, 1));
    r.finish();
    if (c.cfg.global.tolerance) opt.rel_tol = *c.cfg.global.tolerance;
    if (opt.ol_floor <= 0.0 || opt.ol_floor > 1.0) c.issues.push_back({"sweep.ol_floor", "must lie in (0, 1]"});
    if (c.dry) return;

    const auto cells = shaping::sweep_figures_of_merit(G, Q, opt, c.cfg.global.jobs);
    CsvWriter out(c.out("sweep.csv"), "sweep");
    json arr = json::array();
    for (const auto& cell : cells) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        out << cell.G << cell.ql_over_qo << (cell.best ? cell.best->eta_out : nan) << (cell.best ? cell.best->dw_over_gamma : nan);
        out.end_row();
        arr.push_back(io::to_json(cell));
        if (!cell.best) c.report->warnings.push_back("no design met the overlap floor at G=" + format_double(cell.G) + ", QL/Qo=" + format_double(cell.ql_over_qo));
    }
    out.close();
    c.write_json("sweep.json", json{{"cells", arr}});
    c.report->summary["cells"] = arr;
}

void write_fit(Context& c, const fit::FitResult& res, const std::string& tag)
{
    c.write_json("fit_" + tag + ".json", io::to_json(res));
    CsvWriter w(c.out("fit_" + tag + "_cost.csv"), "fit_cost");
    for (std::size_t k = 0; k < res.cost_history.size(); ++k) {
        w << static_cast<double>(k + 1) << res.cost_history[k];
        w.end_row();
    }
    w.close();
    for (const auto& m : res.warnings) c.report->warnings.push_back(tag + ": " + m);
    c.report->summary[tag] = io::to_json(res);
}

std::vector<fs::path> file_list(Context& c, Reader& r, const std::string& key, bool required)
{
    std::vector<fs::path> out;
    auto j = r.object(key);
    if (!j) {
        if (required) r.issue(key, "required (list of transmission CSV files with columns wavelength_nm, voltage_V, transmission)");
        return out;
    }
    const json arr = j->is_array() ? *j : json::array({*j});
    for (const auto& e : arr) {
        if (!e.is_string()) {
            r.issue(key, "entries must be file paths");
            continue;
        }
        const fs::path p = c.input(e.get<std::string>());
        if (!fs::exists(p)) r.issue(key, "file not found: " + p.string());
        out.push_back(p);
    }
    if (out.empty() && required) r.issue(key, "must list at least one file");
    return out;
}

std::vector<MeasuredMap> load_maps(const std::vector<fs::path>& files)
{
    std::vector<MeasuredMap> maps;
    for (const auto& f : files) maps.push_back(load_map(f, f.stem().string()));
    return maps;
}

void cmd_fit(Context& c)
{
    Reader r(section(c.cfg.doc, "fit"), "fit", c.issues);
    std::string stage = r.text("stage").value_or("linear");
    if (!c.cfg.options.stage.empty()) stage = c.cfg.options.stage;
    if (stage != "linear" && stage != "pumped" && stage != "fdm") r.issue("stage", "must be linear, pumped or fdm");
    const double window = r.get_or("window_linewidths", Dim::dimensionless, 3.0);
    const int iters = static_cast<int>(points(r, "max_iterations", 300, 1));
    const auto maps = file_list(c, r, "maps", true);

    struct PumpedSpec {
        fs::path map, idler;
        std::string id;
        double power;
    };
    std::vector<PumpedSpec> pumped;
    if (auto ds = r.object("datasets")) {
        if (!ds->is_array()) r.issue("datasets", "must be a list");
        else
            for (std::size_t k = 0; k < ds->size(); ++k) {
                const std::string path = "fit.datasets[" + std::to_string(k) + "]";
                Reader rd((*ds)[k], path, c.issues);
                PumpedSpec s;
                const auto m = rd.text("map");
                const auto id = rd.text("idler");
                s.id = rd.text("id").value_or("ds" + std::to_string(k + 1));
                s.power = rd.required("signal_power", Dim::power);
                if (!m) rd.issue("map", "required");
                else if (!fs::exists(c.input(*m))) rd.issue("map", "file not found: " + c.input(*m).string());
                if (!id)
                    rd.issue("idler", "required for the pumped stage: CSV with columns wavelength_nm, p_iplus_w, p_iminus_w, dataset_id");
                else if (!fs::exists(c.input(*id)))
                    rd.issue("idler", "file not found: " + c.input(*id).string() + " (expected columns wavelength_nm, p_iplus_w, p_iminus_w, dataset_id)");
                if (m) s.map = c.input(*m);
                if (id) s.idler = c.input(*id);
                rd.finish();
                pumped.push_back(s);
            }
    }
    r.finish();
    if (stage == "pumped" && pumped.empty())
        c.issues.push_back({"fit.datasets", "pumped stage needs datasets with map, idler (columns wavelength_nm, p_iplus_w, p_iminus_w, dataset_id) and signal_power"});
    std::optional<FdmGeometry> geom;
    if (stage == "fdm") geom = need_fdm(c);
    if (c.dry) return;

    const std::vector<MeasuredMap> linear_maps = load_maps(maps);
    if (stage == "fdm") {
        fit::FdmFitOptions o;
        o.initial = *geom;
        o.max_iterations = iters;
        write_fit(c, fit::fit_fdm(linear_maps, o), "fdm");
        return;
    }
    fit::LinearFitOptions lo;
    lo.window_linewidths = window;
    lo.max_iterations = iters;
    const fit::FitResult lin = fit::fit_linear_cmm(linear_maps, lo);
    write_fit(c, lin, "linear");
    if (stage != "pumped") return;

    std::vector<fit::PumpedDataset> data;
    for (const auto& s : pumped) {
        fit::PumpedDataset d;
        d.map = load_map(s.map, s.id);
        d.map.idler = load_idler(s.idler, s.id);
        d.signal_power = s.power;
        data.push_back(std::move(d));
    }
    fit::PumpedFitOptions po;
    po.window_linewidths = window;
    po.max_iterations = iters;
    write_fit(c, fit::fit_pumped(data, lin, po), "pumped");
}

void cmd_synth(Context& c)
{
    Reader r(section(c.cfg.doc, "synth"), "synth", c.issues);
    const std::string model = r.text("model").value_or("cmm");
    if (model != "cmm" && model != "fdm" && model != "pumped") r.issue("model", "must be cmm, fdm or pumped");
    const WavelengthGrid grid = wavelength_grid(r);
    const std::vector<double> V = voltages(r);
    const double sigma = r.non_negative("sigma", Dim::dimensionless).value_or(0.0);
    const double T = r.get_or("T_cpl", Dim::dimensionless, 1.0);
    const auto seed_cfg = r.integer("seed");
    fit::CmmMapModel cm;
    std::vector<double> dnl;
    double Ps = 0.0;
    if (model != "fdm") {
        cm.A = r.get_or("A", Dim::rate, 0.0);
        cm.B = r.get_or("B", Dim::rate_per_v2, 0.0);
        cm.omega_b = omega_from_wavelength(r.get_or("lambda_b", Dim::length, kTelecomWavelength));
        cm.offset_s = r.required("offset_s", Dim::rate);
        cm.offset_ip = r.required("offset_ip", Dim::rate);
        cm.T_cpl = T;
    }
    if (model == "pumped") {
        dnl = r.list("delta_nl", Dim::rate).value_or(std::vector<double>{});
        Ps = r.required("signal_power", Dim::power);
        if (dnl.size() != V.size()) r.issue("delta_nl_rad_s", "needs one entry per voltage");
    }
    r.finish();
    std::optional<CmmParams> rates;
    std::optional<FdmGeometry> geom;
    if (model == "fdm") geom = need_fdm(c);
    else rates = need_cmm(c);
    if (c.dry) return;

    const std::uint64_t seed = c.cfg.global.seed ? *c.cfg.global.seed : static_cast<std::uint64_t>(seed_cfg.value_or(1));
    const fit::NoiseModel noise{sigma};
    c.report->summary["seed"] = seed;
    if (model == "fdm") {
        write_map(c.out("map.csv"), fit::generate_synthetic(*geom, T, grid.nm, V, noise, seed));
        return;
    }
    cm.rates = *rates;
    if (model == "cmm") {
        write_map(c.out("map.csv"), fit::generate_synthetic(cm, grid.nm, V, noise, seed));
        return;
    }
    const auto ds = fit::generate_pumped(cm, V, dnl, Ps, grid.nm, noise, seed);
    CsvWriter idler(c.out("idler.csv"), "idler");
    for (const auto& d : ds) {
        write_map(c.out("map_" + d.map.dataset_id + ".csv"), d.map);
        for (std::size_t j = 0; j < d.map.idler->wavelength_nm.size(); ++j) {
            idler << d.map.idler->wavelength_nm[j] << d.map.idler->p_i_plus[j] << d.map.idler->p_i_minus[j] << d.map.dataset_id;
            idler.end_row();
        }
    }
    idler.close();
}

using Handler = void (*)(Context&);

Handler handler(Command c)
{
    switch (c) {
    case Command::spectrum: return cmd_spectrum;
    case Command::convert: return cmd_convert;
    case Command::design: return cmd_design;
    case Command::cascade: return cmd_cascade;
    case Command::purity: return cmd_purity;
    case Command::shape: return cmd_shape;
    case Command::sweep: return cmd_sweep;
    case Command::fit: return cmd_fit;
    case Command::synth: return cmd_synth;
    }
    return nullptr;
}

void check_top_level(const RunConfig& cfg, std::vector<Issue>& issues)
{
    if (!cfg.doc.is_object()) {
        issues.push_back({"<root>", "config must be a JSON object"});
        return;
    }
    const std::string name = command_name(cfg.command);
    for (auto it = cfg.doc.begin(); it != cfg.doc.end(); ++it) {
        const std::string& k = it.key();
        if (k == "command") {
            if (!it->is_string() || it->get<std::string>() != name)
                issues.push_back({"command", "config is for '" + (it->is_string() ? it->get<std::string>() : std::string("?")) + "', invoked as '" + name + "'"});
        } else if (k != "cmm" && k != "fdm" && k != "pump" && k != name && !parse_command(k)) {
            issues.push_back({k, "unknown key"});
        }
    }
}

} // namespace

Validation validate_config(Command c, const GlobalOptions& g, const CommandOptions& o)
{
    Validation v;
    RunConfig cfg;
    cfg.command = c;
    cfg.global = g;
    cfg.options = o;
    if (g.jobs < 1) v.issues.push_back({"--jobs", "must be at least 1"});
    if (g.tolerance && !(*g.tolerance > 0.0)) v.issues.push_back({"--tolerance", "must be positive"});
    if (!g.config.empty()) {
        if (!fs::exists(g.config)) {
            v.issues.push_back({"--config", "file not found: " + g.config.string()});
            return v;
        }
        std::ifstream f(g.config);
        if (!f) {
            v.issues.push_back({"--config", "cannot read " + g.config.string()});
            return v;
        }
        try {
            cfg.doc = json::parse(f);
        } catch (const json::parse_error& e) {
            v.issues.push_back({"--config", std::string("malformed JSON: ") + e.what()});
            return v;
        }
        cfg.base_dir = g.config.parent_path();
    }
    check_top_level(cfg, v.issues);
    if (!v.issues.empty() && !cfg.doc.is_object()) return v;
    Context ctx{cfg, v.issues, true};
    handler(c)(ctx);
    if (v.issues.empty()) v.config = cfg;
    return v;
}

RunReport run(const RunConfig& cfg)
{
    RunReport rep;
    std::vector<Issue> issues;
    Context ctx{cfg, issues, false, &rep};
    handler(cfg.command)(ctx);
    if (!issues.empty()) throw ConfigError(io::format_issues(issues));
    return rep;
}

namespace {

json manifest(const RunConfig& cfg, const RunReport& rep)
{
    json opts{{"ratios", cfg.options.ratios}, {"stage", cfg.options.stage}};
    const std::string canon = command_name(cfg.command) + "\n" + cfg.doc.dump() + "\n" + opts.dump();
    json arts = json::array();
    for (const auto& p : rep.artifacts) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        arts.push_back({{"file", p.filename().string()}, {"fnv1a", hex64(fnv1a(ss.str()))}});
    }
    json m{{"tool", "ringfc"},
           {"version", RINGFC_VERSION},
           {"command", command_name(cfg.command)},
           {"config_hash", hex64(fnv1a(canon))},
           {"config", cfg.doc},
           {"options", opts},
           {"jobs", cfg.global.jobs},
           {"artifacts", arts},
           {"warnings", rep.warnings}};
    m["seed"] = cfg.global.seed ? json(*cfg.global.seed) : json(nullptr);
    m["tolerance"] = cfg.global.tolerance ? json(*cfg.global.tolerance) : json(nullptr);
    return m;
}

} // namespace

int run_main(Command c, const GlobalOptions& g, const CommandOptions& o, std::ostream& out, std::ostream& err)
{
    try {
        const Validation v = validate_config(c, g, o);
        if (!v.config) {
            err << "invalid configuration:\n" << io::format_issues(v.issues);
            return ExitCode::validation;
        }
        std::error_code ec;
        fs::create_directories(g.out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + g.out_dir.string() + ": " + ec.message());
        const RunReport rep = run(*v.config);
        for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
        const json m = manifest(*v.config, rep);
        {
            std::ofstream f(g.out_dir / "manifest.json", std::ios::binary);
            if (!f) throw IoError("cannot write manifest in " + g.out_dir.string());
            f << m.dump(2) << "\n";
        }
        for (const auto& p : rep.artifacts) out << p.string() << "\n";
        return ExitCode::ok;
    } catch (const FitFailure& e) {
        err << "error: " << e.what() << "\n" << e.diagnostics() << "\n";
        return ExitCode::convergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

} // namespace ringfc::app
