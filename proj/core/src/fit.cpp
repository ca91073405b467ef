#include "ringfc/fit.hpp"

#include "ringfc/cmm.hpp"
#include "ringfc/errors.hpp"
#include "ringfc/fdm.hpp"
#include "ringfc/units.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace ringfc::fit {

// ---------------------------------------------------------------- model

double CmmMapModel::omega_i_minus(double V, double delta_nl) const
{
    return omega_b - heater_detuning(A, B, V) - delta_nl;
}

CmmParams CmmMapModel::at(double V, double delta_nl) const
{
    CmmParams p = rates;
    p.delta_ab = heater_detuning(A, B, V);
    p.delta_NL = delta_nl;
    return p;
}

double CmmMapModel::transmission(double omega, double V, double delta_nl) const
{
    const CmmParams p = at(V, delta_nl);
    const double wm = omega_i_minus(V, delta_nl);
    const double a = std::norm(coupled_mode_through(p, omega - wm));
    const double b = std::norm(single_mode_through(p.coupling_s(), p.total_s(), omega - wm - offset_s));
    const double c = std::norm(single_mode_through(p.coupling_i_plus(), p.total_i_plus(), omega - wm - offset_ip));
    return T_cpl * T_cpl * a * b * c;
}

double CmmMapModel::idler_plus(double omega, double V, double delta_nl, double P_s) const
{
    const double ws = omega_i_minus(V, delta_nl) + offset_s;
    return P_s * conversion_efficiency(at(V, delta_nl), omega - ws, SignalModel::undepleted).eta_i_plus;
}

double CmmMapModel::idler_minus(double omega, double V, double delta_nl, double P_s) const
{
    const double ws = omega_i_minus(V, delta_nl) + offset_s;
    return P_s * conversion_efficiency(at(V, delta_nl), omega - ws, SignalModel::undepleted).eta_i_minus;
}

const char* stage_name(Stage s)
{
    switch (s) {
    case Stage::linear_cmm: return "linear-CMM";
    case Stage::pumped_cmm: return "pumped-CMM";
    case Stage::fdm: return "FDM";
    }
    return "?";
}

double FitResult::value(const std::string& name) const
{
    for (const auto& p : parameters)
        if (p.name == name) return p.value;
    throw DomainError("fit result has no parameter " + name);
}

double FitResult::uncertainty(const std::string& name) const
{
    for (const auto& p : parameters)
        if (p.name == name) return p.uncertainty;
    throw DomainError("fit result has no parameter " + name);
}

// ---------------------------------------------------------------- helpers

namespace {

constexpr double kRate = 1e9;  // rates are optimized in units of 1e9 rad/s

struct Trace {
    std::vector<double> w;  // ascending
    std::vector<double> y;
};

Trace row_trace(const MeasuredMap& m, Eigen::Index row)
{
    const std::vector<double> w = m.omega_grid();
    std::vector<std::size_t> idx(w.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
    Trace t;
    for (std::size_t k : idx) {
        t.w.push_back(w[k]);
        t.y.push_back(m.transmission(row, static_cast<Eigen::Index>(k)));
    }
    return t;
}

double quantile(std::vector<double> v, double q)
{
    if (v.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

double off_resonance_level(std::span<const MeasuredMap> maps)
{
    std::vector<double> all;
    for (const auto& m : maps)
        for (Eigen::Index i = 0; i < m.transmission.size(); ++i) all.push_back(m.transmission.data()[i]);
    return quantile(all, 0.9);
}

// Robust noise level from second differences (a smooth signal contributes little to the median).
double noise_level(const std::vector<double>& v, double floor)
{
    if (v.size() < 5) return floor;
    std::vector<double> d;
    for (std::size_t k = 1; k + 1 < v.size(); ++k) d.push_back(std::abs(v[k + 1] - 2.0 * v[k] + v[k - 1]));
    return std::max(1.4826 * quantile(d, 0.5) / std::sqrt(6.0), floor);
}

struct Dip {
    double omega;
    double depth;  // 1 - normalized minimum
    double fwhm;
};

std::vector<Dip> find_dips(const Trace& t, double level)
{
    const std::size_t n = t.y.size();
    std::vector<double> s(n);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        int c = 0;
        for (std::size_t j = (k < 2 ? 0 : k - 2); j <= std::min(n - 1, k + 2); ++j, ++c) acc += t.y[j];
        s[k] = acc / c / level;
    }
    const double smin = *std::min_element(s.begin(), s.end());
    if (1.0 - smin < 0.1) return {};
    const double thr = 1.0 - 0.3 * (1.0 - smin);
    std::vector<Dip> out;
    std::size_t k = 0;
    while (k < n) {
        if (s[k] >= thr) {
            ++k;
            continue;
        }
        std::size_t a = k;
        while (k < n && s[k] < thr) ++k;
        const std::size_t b = k;  // run [a, b)
        if (b - a < 2 || a == 0 || b == n) continue;
        std::size_t im = a;
        for (std::size_t j = a; j < b; ++j)
            if (s[j] < s[im]) im = j;
        // parabolic refinement of the minimum
        double wmin = t.w[im];
        if (im > 0 && im + 1 < n) {
            const double y0 = s[im - 1], y1 = s[im], y2 = s[im + 1];
            const double den = y0 - 2.0 * y1 + y2;
            if (den > 0.0) wmin += 0.5 * (y0 - y2) / den * 0.5 * (t.w[im + 1] - t.w[im - 1]);
        }
        const double half = 0.5 * (1.0 + s[im]);
        std::size_t l = im, r = im;
        while (l > 0 && s[l] < half) --l;
        while (r + 1 < n && s[r] < half) ++r;
        auto cross = [&](std::size_t i0, std::size_t i1) {
            const double f = (half - s[i0]) / (s[i1] - s[i0]);
            return t.w[i0] + f * (t.w[i1] - t.w[i0]);
        };
        const double wl = (s[l] >= half && l < im) ? cross(l + 1, l) : t.w[l];
        const double wr = (s[r] >= half && r > im) ? cross(r - 1, r) : t.w[r];
        out.push_back({wmin, 1.0 - s[im], wr - wl});
    }
    return out;
}

struct LineFit {
    double slope;
    double intercept;
};

LineFit linear_regression(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    return {slope, my - slope * mx};
}

// Coupling/loss split of a single Lorentzian dip, assuming over-coupling.
std::pair<double, double> split_linewidth(double Gamma, double depth)
{
    const double tmin = std::clamp(1.0 - depth, 0.0, 1.0);
    const double gamma = 0.5 * Gamma * (1.0 + std::sqrt(tmin));
    return {gamma, std::max(Gamma - gamma, 0.02 * Gamma)};
}

// ---------------------------------------------------------------- optimizer

struct Problem {
    Eigen::Index n;
    Eigen::Index m;
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> f;
};

struct LmFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const Problem* p;
    int* calls;
    int inputs() const { return static_cast<int>(p->n); }
    int values() const { return static_cast<int>(p->m); }
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fv) const
    {
        ++*calls;
        p->f(x, fv);
        return fv.allFinite() ? 0 : -1;
    }
};

struct LmOutcome {
    Eigen::VectorXd x;
    Eigen::VectorXd sigma;  // parameter standard errors in optimizer units
    double fnorm;
    std::vector<double> history;
    int iterations;
    int evaluations;
    bool rank_deficient;
};

const char* lm_status_text(int s)
{
    switch (s) {
    case Eigen::LevenbergMarquardtSpace::ImproperInputParameters: return "improper input parameters";
    case Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation: return "too many function evaluations";
    case Eigen::LevenbergMarquardtSpace::UserAsked: return "non-finite residual";
    default: return "converged";
    }
}

LmOutcome run_lm(const Problem& prob, Eigen::VectorXd x, int max_iterations, const std::vector<std::string>& names)
{
    if (prob.m < prob.n) throw FitFailure("fewer residuals than parameters", "m=" + std::to_string(prob.m));
    int calls = 0;
    LmFunctor functor{&prob, &calls};
    Eigen::NumericalDiff<LmFunctor, Eigen::Central> nd(functor, 1e-12);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LmFunctor, Eigen::Central>> lm(nd);
    lm.parameters.ftol = 1e-15;
    lm.parameters.xtol = 1e-15;
    lm.parameters.gtol = 0.0;
    lm.parameters.maxfev = 1000000;

    LmOutcome out;
    auto diagnostics = [&](const std::string& why) {
        std::ostringstream os;
        os << why << "; iterations=" << out.iterations << " fnorm=" << lm.fnorm << " x=[";
        for (Eigen::Index k = 0; k < x.size(); ++k)
            os << (k ? ", " : "") << (static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)] + "=" : "") << x[k];
        os << "]";
        return os.str();
    };

    out.iterations = 0;
    auto status = lm.minimizeInit(x);
    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters)
        throw FitFailure("optimizer rejected its input", diagnostics("improper input"));
    while (true) {
        status = lm.minimizeOneStep(x);
        ++out.iterations;
        out.history.push_back(lm.fnorm);
        if (status != Eigen::LevenbergMarquardtSpace::Running) break;
        if (out.iterations >= max_iterations)
            throw FitFailure("fit did not converge within the iteration limit", diagnostics("max iterations"));
    }
    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters
        || status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation
        || status == Eigen::LevenbergMarquardtSpace::UserAsked || !x.allFinite() || !std::isfinite(lm.fnorm))
        throw FitFailure("fit failed", diagnostics(lm_status_text(status)));

    Eigen::VectorXd fv(prob.m);
    prob.f(x, fv);
    Eigen::MatrixXd J(prob.m, prob.n);
    nd.df(x, J);
    if (!J.allFinite() || J.norm() == 0.0) throw FitFailure("singular Jacobian at the solution", diagnostics("zero Jacobian"));
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(JtJ);
    cod.setThreshold(1e-12);
    const double dof = static_cast<double>(std::max<Eigen::Index>(1, prob.m - prob.n));
    const double s2 = fv.squaredNorm() / dof;
    const Eigen::MatrixXd cov = s2 * cod.pseudoInverse();
    out.sigma = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.rank_deficient = cod.rank() < prob.n;
    out.x = x;
    out.fnorm = fv.norm();
    out.evaluations = calls;
    return out;
}

// ---------------------------------------------------------------- linear stage

struct Point {
    double omega;
    double V;
    double data;
    std::size_t dataset;
};

struct Windows {
    double half;
    CmmMapModel model;
    std::vector<double> delta_nl;
};

bool in_window(const CmmMapModel& m, double w, double V, double dnl, double width)
{
    const double wm = m.omega_i_minus(V, dnl);
    const double ws = wm + m.offset_s;
    const double wp = wm + m.offset_ip;
    if (std::abs(w - ws) <= width || std::abs(w - wp) <= width) return true;
    const double lo = std::min(wm, m.omega_b) - m.rates.g - width;
    const double hi = std::max(wm, m.omega_b) + m.rates.g + width;
    return w >= lo && w <= hi && std::abs(w - ws) > 0.5 * std::abs(m.offset_s);
}

CmmMapModel decode_linear(const Eigen::VectorXd& x, double omega0)
{
    CmmMapModel m;
    m.rates.gamma = std::abs(x[0]) * kRate;
    m.rates.gamma_L1 = std::abs(x[1]) * kRate;
    m.rates.gamma_L2 = std::abs(x[2]) * kRate;
    m.rates.g = std::abs(x[3]) * kRate;
    m.A = x[4] * kRate;
    m.B = x[5] * kRate;
    m.omega_b = omega0 + x[6] * kRate;
    m.offset_s = x[7] * kRate;
    m.offset_ip = x[8] * kRate;
    m.T_cpl = x[9];
    return m;
}

Eigen::VectorXd encode_linear(const CmmMapModel& m, double omega0)
{
    Eigen::VectorXd x(10);
    x << m.rates.gamma / kRate, m.rates.gamma_L1 / kRate, m.rates.gamma_L2 / kRate, m.rates.g / kRate, m.A / kRate,
        m.B / kRate, (m.omega_b - omega0) / kRate, m.offset_s / kRate, m.offset_ip / kRate, m.T_cpl;
    return x;
}

const std::vector<std::string> kLinearNames{"gamma", "gamma_L1", "gamma_L2", "g", "A", "B", "omega_b", "offset_s", "offset_ip", "T_cpl"};

double data_center(std::span<const MeasuredMap> maps)
{
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& m : maps)
        for (double w : m.omega_grid()) {
            lo = std::min(lo, w);
            hi = std::max(hi, w);
        }
    return 0.5 * (lo + hi);
}

} // namespace

CmmMapModel initialize_linear_cmm(std::span<const MeasuredMap> maps)
{
    if (maps.empty()) throw DataError("no transmission maps supplied");
    const double level = off_resonance_level(maps);
    if (!(level > 0.0)) throw DataError("transmission map has no off-resonance level");

    struct RowDips {
        double V;
        std::vector<Dip> dips;
    };
    std::vector<RowDips> rows;
    for (const auto& m : maps)
        for (Eigen::Index i = 0; i < m.transmission.rows(); ++i)
            rows.push_back({m.voltage[static_cast<std::size_t>(i)], find_dips(row_trace(m, i), level)});

    // two highest-frequency dips are i+ and s; everything further down belongs to i-
    std::vector<double> u, ws, wp, F;
    std::vector<Dip> s_dips;
    for (const auto& r : rows) {
        if (r.dips.size() < 2) continue;
        const Dip& p = r.dips[r.dips.size() - 1];
        const Dip& s = r.dips[r.dips.size() - 2];
        u.push_back(r.V * r.V);
        ws.push_back(s.omega);
        wp.push_back(p.omega);
        F.push_back(p.omega - s.omega);
        s_dips.push_back(s);
    }
    if (u.size() < 2) throw FitFailure("could not locate the signal and up-converted resonances", "rows with two dips: " + std::to_string(u.size()));
    const double Fest = quantile(F, 0.5);
    const LineFit fs = linear_regression(u, ws);
    const LineFit fp = linear_regression(u, wp);

    // i- splitting: separation of the two deepest dips below the signal
    std::vector<double> su, sep2, mids, fw;
    for (const auto& r : rows) {
        if (r.dips.size() < 2) continue;
        const double wsr = r.dips[r.dips.size() - 2].omega;
        std::vector<Dip> low;
        for (const Dip& d : r.dips)
            if (d.omega < wsr - 0.5 * Fest) low.push_back(d);
        if (low.size() < 2) continue;
        std::sort(low.begin(), low.end(), [](const Dip& a, const Dip& b) { return a.depth > b.depth; });
        const double d = std::abs(low[0].omega - low[1].omega);
        su.push_back(r.V * r.V);
        sep2.push_back(d * d);
        mids.push_back(0.5 * (low[0].omega + low[1].omega));
        fw.push_back(0.5 * (low[0].fwhm + low[1].fwhm));
    }
    if (su.empty()) throw FitFailure("no split down-converted resonance found in the map", "rows with split i- dips: 0");

    std::size_t kmin = static_cast<std::size_t>(std::min_element(sep2.begin(), sep2.end()) - sep2.begin());
    double ustar = su[kmin];
    double sep2min = sep2[kmin];
    if (su.size() >= 3) {
        // sep^2 ~ (B (u - u*))^2 + 4 g^2 is quadratic in u = V^2
        Eigen::MatrixXd X(static_cast<Eigen::Index>(su.size()), 3);
        Eigen::VectorXd y(static_cast<Eigen::Index>(su.size()));
        for (std::size_t k = 0; k < su.size(); ++k) {
            X(static_cast<Eigen::Index>(k), 0) = su[k] * su[k];
            X(static_cast<Eigen::Index>(k), 1) = su[k];
            X(static_cast<Eigen::Index>(k), 2) = 1.0;
            y[static_cast<Eigen::Index>(k)] = sep2[k];
        }
        const Eigen::Vector3d c = X.colPivHouseholderQr().solve(y);
        const double uv = -c[1] / (2.0 * c[0]);
        const double vmin = c[2] - c[1] * c[1] / (4.0 * c[0]);
        if (c[0] > 0.0 && vmin > 0.0 && uv >= *std::min_element(su.begin(), su.end()) && uv <= *std::max_element(su.begin(), su.end())) {
            ustar = uv;
            sep2min = vmin;
        }
    }

    // linewidth from the signal dip of the middle row
    const Dip& sd = s_dips[s_dips.size() / 2];
    const double Gamma = sd.fwhm;
    const auto [gamma, gL1] = split_linewidth(Gamma, sd.depth);

    CmmMapModel m;
    m.rates.gamma = gamma;
    m.rates.gamma_L1 = gL1;
    m.rates.gamma_L2 = std::clamp(2.0 * fw[kmin] - Gamma, 0.1 * Gamma, 2.0 * Gamma);
    m.rates.g = std::sqrt(0.25 * sep2min + std::pow(0.25 * (Gamma - m.rates.gamma_L2), 2));
    m.B = -fs.slope;
    m.A = -m.B * ustar;
    m.omega_b = mids[kmin];
    m.offset_s = fs.intercept + fs.slope * ustar - m.omega_b;
    m.offset_ip = fp.intercept + fp.slope * ustar - m.omega_b;
    m.T_cpl = std::sqrt(level);
    return m;
}

FitResult fit_linear_cmm(std::span<const MeasuredMap> maps, const LinearFitOptions& opt)
{
    if (maps.empty()) throw DataError("no transmission maps supplied");
    for (const auto& m : maps) m.validate();
    CmmMapModel init = opt.initial ? *opt.initial : initialize_linear_cmm(maps);
    init.rates.gamma_FCA = 0.0;
    init.rates.chi_bar = 0.0;
    const double Gamma0 = init.rates.gamma + init.rates.gamma_L1;
    const double width = opt.window_linewidths * Gamma0;

    std::vector<Point> pts;
    for (std::size_t d = 0; d < maps.size(); ++d) {
        const auto& m = maps[d];
        const std::vector<double> w = m.omega_grid();
        for (Eigen::Index i = 0; i < m.transmission.rows(); ++i)
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double V = m.voltage[static_cast<std::size_t>(i)];
                if (in_window(init, w[j], V, 0.0, width))
                    pts.push_back({w[j], V, m.transmission(i, static_cast<Eigen::Index>(j)), d});
            }
    }
    std::vector<double> vals;
    for (const auto& p : pts) vals.push_back(p.data);
    const double sigma = noise_level(vals, 1e-6);

    const double omega0 = data_center(maps);
    Problem prob{10, static_cast<Eigen::Index>(pts.size()), {}};
    prob.f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& fv) {
        const CmmMapModel m = decode_linear(x, omega0);
        fv.resize(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t k = 0; k < pts.size(); ++k)
            fv[static_cast<Eigen::Index>(k)] = (m.transmission(pts[k].omega, pts[k].V) - pts[k].data) / sigma;
    };
    const LmOutcome o = run_lm(prob, encode_linear(init, omega0), opt.max_iterations, kLinearNames);

    FitResult r;
    r.stage = Stage::linear_cmm;
    const CmmMapModel best = decode_linear(o.x, omega0);
    r.cmm = best;
    r.T_cpl = best.T_cpl;
    const double scale[10] = {kRate, kRate, kRate, kRate, kRate, kRate, kRate, kRate, kRate, 1.0};
    const double value[10] = {best.rates.gamma, best.rates.gamma_L1, best.rates.gamma_L2, best.rates.g, best.A, best.B,
                              best.omega_b, best.offset_s, best.offset_ip, best.T_cpl};
    for (int k = 0; k < 10; ++k)
        r.parameters.push_back({kLinearNames[static_cast<std::size_t>(k)], value[k], o.sigma[k] * scale[k]});
    r.residual_norm = o.fnorm * sigma;
    r.cost_history = o.history;
    for (double& c : r.cost_history) c *= sigma;
    r.iterations = o.iterations;
    r.evaluations = o.evaluations;
    r.n_residuals = pts.size();
    for (const auto& m : maps) r.dataset_ids.push_back(m.dataset_id);
    if (o.rank_deficient) r.warnings.push_back("Jacobian is rank deficient; some parameters are not identifiable");
    return r;
}

// ---------------------------------------------------------------- pumped stage

FitResult fit_pumped(std::span<const PumpedDataset> data, const FitResult& linear, const PumpedFitOptions& opt)
{
    if (!linear.cmm || linear.stage != Stage::linear_cmm) throw DataError("pumped fit needs a linear-CMM fit result");
    const CmmMapModel lin = *linear.cmm;
    FitResult r;
    r.stage = Stage::pumped_cmm;

    std::vector<const PumpedDataset*> used;
    for (const auto& d : data) {
        d.map.validate();
        if (d.map.voltage.size() != 1) throw DataError("pumped dataset " + d.map.dataset_id + " must hold exactly one voltage row");
        if (!d.map.idler) {
            r.warnings.push_back("dataset " + d.map.dataset_id + " has no idler spectra and was skipped");
            continue;
        }
        used.push_back(&d);
    }
    if (used.empty()) throw DataError("no pumped dataset with idler spectra (expected columns: wavelength_nm, p_iplus_w, p_iminus_w, dataset_id)");
    const std::size_t K = used.size();

    // initial guesses from the signal dip of each dataset
    const double Gamma_lin = lin.rates.gamma + lin.rates.gamma_L1;
    std::vector<double> dnl0(K, 0.0);
    std::vector<double> extra;
    double eta_peak = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const MeasuredMap& m = used[k]->map;
        const double V = m.voltage[0];
        const std::span<const MeasuredMap> one(&m, 1);
        const auto dips = find_dips(row_trace(m, 0), off_resonance_level(one));
        const double ws_lin = lin.omega_i_minus(V) + lin.offset_s;
        const Dip* best = nullptr;
        for (const Dip& d : dips)
            if (!best || std::abs(d.omega - ws_lin) < std::abs(best->omega - ws_lin)) best = &d;
        if (best && std::abs(best->omega - ws_lin) < 0.25 * std::abs(lin.offset_s)) {
            dnl0[k] = ws_lin - best->omega;
            extra.push_back(best->fwhm - Gamma_lin);
        }
        for (double p : m.idler->p_i_plus) eta_peak = std::max(eta_peak, p / used[k]->signal_power);
    }
    const double gfca0 = std::max(extra.empty() ? 0.0 : quantile(extra, 0.5), 0.05 * Gamma_lin);
    const double Gbar = Gamma_lin + gfca0;
    const double chi0 = std::max(Gbar * Gbar * std::sqrt(eta_peak) / (4.0 * lin.rates.gamma), 1e-3 * kRate);

    CmmMapModel win = lin;
    win.rates.gamma_FCA = gfca0;
    const double width = opt.window_linewidths * Gbar;

    struct Sample {
        double omega;
        double data;
        std::size_t k;
        int kind;  // 0 transmission, 1 idler +, 2 idler -
    };
    std::vector<Sample> samples;
    std::vector<double> tvals, pvals;
    for (std::size_t k = 0; k < K; ++k) {
        const MeasuredMap& m = used[k]->map;
        const std::vector<double> w = m.omega_grid();
        const double V = m.voltage[0];
        for (std::size_t j = 0; j < w.size(); ++j)
            if (in_window(win, w[j], V, dnl0[k], width)) {
                samples.push_back({w[j], m.transmission(0, static_cast<Eigen::Index>(j)), k, 0});
                tvals.push_back(samples.back().data);
            }
        const IdlerSpectra& id = *m.idler;
        for (std::size_t j = 0; j < id.wavelength_nm.size(); ++j) {
            const double w_ = omega_from_wavelength(id.wavelength_nm[j] * 1e-9);
            const double ws = win.omega_i_minus(V, dnl0[k]) + win.offset_s;
            if (std::abs(w_ - ws) > width) continue;
            samples.push_back({w_, id.p_i_plus[j], k, 1});
            samples.push_back({w_, id.p_i_minus[j], k, 2});
            pvals.push_back(id.p_i_plus[j]);
        }
    }
    const double sigT = noise_level(tvals, 1e-6);
    const double pmax = pvals.empty() ? 1.0 : *std::max_element(pvals.begin(), pvals.end());
    const double sigP = noise_level(pvals, 1e-3 * pmax);

    auto decode = [&](const Eigen::VectorXd& x) {
        CmmMapModel m = lin;
        m.rates.gamma_FCA = std::abs(x[0]) * kRate;
        m.rates.chi_bar = std::abs(x[1]) * kRate;
        return m;
    };
    Problem prob{static_cast<Eigen::Index>(2 + K), static_cast<Eigen::Index>(samples.size()), {}};
    prob.f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& fv) {
        const CmmMapModel m = decode(x);
        fv.resize(static_cast<Eigen::Index>(samples.size()));
        for (std::size_t s = 0; s < samples.size(); ++s) {
            const Sample& p = samples[s];
            const double V = used[p.k]->map.voltage[0];
            const double dnl = x[static_cast<Eigen::Index>(2 + p.k)] * kRate;
            const double Ps = used[p.k]->signal_power;
            double model, sig;
            if (p.kind == 0) {
                model = m.transmission(p.omega, V, dnl);
                sig = sigT;
            } else if (p.kind == 1) {
                model = m.idler_plus(p.omega, V, dnl, Ps);
                sig = sigP;
            } else {
                model = m.idler_minus(p.omega, V, dnl, Ps);
                sig = sigP;
            }
            fv[static_cast<Eigen::Index>(s)] = (model - p.data) / sig;
        }
    };
    Eigen::VectorXd x0(static_cast<Eigen::Index>(2 + K));
    x0[0] = gfca0 / kRate;
    x0[1] = chi0 / kRate;
    for (std::size_t k = 0; k < K; ++k) x0[static_cast<Eigen::Index>(2 + k)] = dnl0[k] / kRate;
    std::vector<std::string> names{"gamma_FCA", "chi_bar"};
    for (std::size_t k = 0; k < K; ++k) names.push_back("delta_NL[" + used[k]->map.dataset_id + "]");
    const LmOutcome o = run_lm(prob, x0, opt.max_iterations, names);

    const CmmMapModel best = decode(o.x);
    r.cmm = best;
    r.T_cpl = best.T_cpl;
    r.parameters.push_back({"gamma_FCA", best.rates.gamma_FCA, o.sigma[0] * kRate});
    r.parameters.push_back({"chi_bar", best.rates.chi_bar, o.sigma[1] * kRate});
    for (std::size_t k = 0; k < K; ++k) {
        const double v = o.x[static_cast<Eigen::Index>(2 + k)] * kRate;
        r.delta_nl.push_back(v);
        r.dataset_ids.push_back(used[k]->map.dataset_id);
        r.parameters.push_back({names[2 + k], v, o.sigma[static_cast<Eigen::Index>(2 + k)] * kRate});
    }
    r.residual_norm = o.fnorm;
    r.cost_history = o.history;
    r.iterations = o.iterations;
    r.evaluations = o.evaluations;
    r.n_residuals = samples.size();
    if (o.rank_deficient) r.warnings.push_back("Jacobian is rank deficient; some parameters are not identifiable");
    return r;
}

// ---------------------------------------------------------------- FDM stage

namespace {

struct FdmCodec {
    FdmGeometry base;
    double n0_ref;

    FdmGeometry decode(const Eigen::VectorXd& x) const
    {
        FdmGeometry g = base;
        g.n_g = x[4];
        g.nu1 = nu_from_gamma(std::abs(x[0]) * kRate, g.L1, std::abs(g.n_g));
        g.nu2 = nu_from_gamma(std::abs(x[1]) * kRate, g.L2, std::abs(g.n_g));
        g.n_eff_re = n0_ref + x[2] * 1e-4;
        g.n_eff_im = std::abs(x[3]) * 1e-5;
        g.dnV = x[5] * 1e-4;
        return g;
    }
    Eigen::VectorXd encode(const FdmGeometry& g, double T_cpl) const
    {
        Eigen::VectorXd x(7);
        x << gamma_from_nu(g.nu1, g.L1, g.n_g) / kRate, gamma_from_nu(g.nu2, g.L2, g.n_g) / kRate,
            (g.n_eff_re - n0_ref) * 1e4, g.n_eff_im * 1e5, g.n_g, g.dnV * 1e4, T_cpl;
        return x;
    }
};

const std::vector<std::string> kFdmNames{"gamma1", "gamma2", "n_eff_re", "n_eff_im", "n_g", "dnV", "T_cpl"};

} // namespace

FitResult fit_fdm(std::span<const MeasuredMap> maps, const FdmFitOptions& opt)
{
    if (maps.empty()) throw DataError("no transmission maps supplied");
    for (const auto& m : maps) m.validate();
    FdmGeometry g0 = opt.initial;
    g0.mzi.reset();
    require_positive(g0.L1, "L1");
    require_positive(g0.L2, "L2");
    require_positive(g0.omega_ref, "omega_ref");
    if (!(g0.n_g > 0.0)) g0.n_g = 4.0;
    const double level = off_resonance_level(maps);
    double T0 = opt.T_cpl_initial > 0.0 ? opt.T_cpl_initial : std::sqrt(level);
    FitResult r;
    r.stage = Stage::fdm;

    struct Pt {
        double omega, V, data;
    };
    std::vector<Pt> pts;
    for (const auto& m : maps) {
        const std::vector<double> w = m.omega_grid();
        for (Eigen::Index i = 0; i < m.transmission.rows(); ++i)
            for (std::size_t j = 0; j < w.size(); ++j)
                pts.push_back({w[j], m.voltage[static_cast<std::size_t>(i)], m.transmission(i, static_cast<Eigen::Index>(j))});
    }

    std::vector<FdmGeometry> candidates;
    if (opt.auto_initialize) {
        // a CMM fit of the same map seeds the transfer-matrix parameters
        std::optional<FitResult> seed;
        try {
            seed = fit_linear_cmm(maps);
        } catch (const Error&) {
        }
        if (seed) {
            const CmmMapModel& c = *seed->cmm;
            FdmGeometry g = g0;
            g.n_g = 2.0 * kPi * kSpeedOfLight * 2.0 / (g.L1 * c.offset_ip);
            g.nu1 = nu_from_gamma(c.rates.gamma, g.L1, g.n_g);
            g.n_eff_im = c.rates.gamma_L1 * g.n_g / (2.0 * g.omega_ref);
            g.dnV = c.B * g.n_g / g.omega_ref;
            try {
                g.nu2 = nu2_for_coupling(g, c.rates.g, c.rates.gamma);
            } catch (const Error&) {
            }
            T0 = c.T_cpl;
            // ring 2 resonates at omega_b, ring 1's i- mode at omega_b - A for V = 0 (coupler phases included)
            const double k1 = g.omega_ref * g.L1 / kSpeedOfLight;
            const double k2 = g.omega_ref * g.L2 / kSpeedOfLight;
            const double ph2 = g.n_g * (c.omega_b - g.omega_ref) * g.L2 / kSpeedOfLight + g.theta2;
            const double m2 = std::round((opt.initial.n_eff_re * k2 + ph2) / (2.0 * kPi));
            const double n_ring2 = (2.0 * kPi * m2 - ph2) / k2;
            const double ph1 = g.n_g * (c.omega_b - c.A - g.omega_ref) * g.L1 / kSpeedOfLight + g.theta1 + g.theta2;
            const double m1 = std::round((n_ring2 * k1 + ph1) / (2.0 * kPi));
            const double n_ring1 = (2.0 * kPi * m1 - ph1) / k1;
            for (int j = -1; j <= 1; ++j) {
                FdmGeometry cand = g;
                cand.n_eff_re = n_ring1 + j * 2.0 * kPi / k1;
                candidates.push_back(cand);
            }
        } else {
            FdmGeometry g = g0;
            g.n_eff_im = 0.0;
            candidates.push_back(g);
            r.warnings.push_back("no resonance dips found; starting from the supplied geometry without loss");
        }
    } else {
        candidates.push_back(g0);
    }

    auto cost = [&](const FdmGeometry& g, double T) {
        double s = 0.0;
        for (const auto& p : pts) {
            const double e = T * T * std::norm(fdm::bus_transmission(g, p.omega, p.V)) - p.data;
            s += e * e;
        }
        return s;
    };
    std::size_t best_c = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double v = cost(candidates[c], T0);
        if (v < best_cost) {
            best_cost = v;
            best_c = c;
        }
    }
    const FdmCodec codec{candidates[best_c], candidates[best_c].n_eff_re};

    std::vector<double> vals;
    for (const auto& p : pts) vals.push_back(p.data);
    const double sigma = noise_level(vals, 1e-6);
    Problem prob{7, static_cast<Eigen::Index>(pts.size()), {}};
    prob.f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& fv) {
        const FdmGeometry g = codec.decode(x);
        const double T = x[6];
        fv.resize(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t k = 0; k < pts.size(); ++k)
            fv[static_cast<Eigen::Index>(k)] = (T * T * std::norm(fdm::bus_transmission(g, pts[k].omega, pts[k].V)) - pts[k].data) / sigma;
    };
    const LmOutcome o = run_lm(prob, codec.encode(codec.base, T0), opt.max_iterations, kFdmNames);

    const FdmGeometry best = codec.decode(o.x);
    r.fdm = best;
    r.T_cpl = o.x[6];
    const double gamma1 = gamma_from_nu(best.nu1, best.L1, best.n_g);
    const double gamma2 = gamma_from_nu(best.nu2, best.L2, best.n_g);
    const double gL = 2.0 * best.omega_ref * best.n_eff_im / best.n_g;
    // nu uncertainties follow from the rate uncertainties through d nu / d gamma = -nu n_g L / (2c)
    r.parameters.push_back({"nu1", best.nu1, best.nu1 * best.n_g * best.L1 / (2.0 * kSpeedOfLight) * o.sigma[0] * kRate});
    r.parameters.push_back({"nu2", best.nu2, best.nu2 * best.n_g * best.L2 / (2.0 * kSpeedOfLight) * o.sigma[1] * kRate});
    r.parameters.push_back({"n_eff_re", best.n_eff_re, o.sigma[2] * 1e-4});
    r.parameters.push_back({"n_eff_im", best.n_eff_im, o.sigma[3] * 1e-5});
    r.parameters.push_back({"n_g", best.n_g, o.sigma[4]});
    r.parameters.push_back({"dnV", best.dnV, o.sigma[5] * 1e-4});
    r.parameters.push_back({"T_cpl", r.T_cpl, o.sigma[6]});
    r.parameters.push_back({"gamma", gamma1, o.sigma[0] * kRate});
    r.parameters.push_back({"gamma2", gamma2, o.sigma[1] * kRate});
    r.parameters.push_back({"gamma_L", gL, 2.0 * best.omega_ref * o.sigma[3] * 1e-5 / best.n_g});
    try {
        r.parameters.push_back({"g", g_from_geometry(best, gamma1), std::numeric_limits<double>::quiet_NaN()});
    } catch (const Error& e) {
        r.warnings.push_back(std::string("ring-ring coupling not available: ") + e.what());
    }
    r.residual_norm = o.fnorm * sigma;
    r.cost_history = o.history;
    for (double& c : r.cost_history) c *= sigma;
    r.iterations = o.iterations;
    r.evaluations = o.evaluations;
    r.n_residuals = pts.size();
    for (const auto& m : maps) r.dataset_ids.push_back(m.dataset_id);
    if (o.rank_deficient) r.warnings.push_back("Jacobian is rank deficient; some parameters are not identifiable");
    return r;
}

// ---------------------------------------------------------------- synthetic data

namespace {

MeasuredMap empty_map(std::span<const double> wavelength_nm, std::span<const double> voltage)
{
    MeasuredMap m;
    m.wavelength_nm.assign(wavelength_nm.begin(), wavelength_nm.end());
    m.voltage.assign(voltage.begin(), voltage.end());
    m.transmission.resize(static_cast<Eigen::Index>(voltage.size()), static_cast<Eigen::Index>(wavelength_nm.size()));
    m.dataset_id = "synthetic";
    return m;
}

void add_noise(Eigen::MatrixXd& t, const NoiseModel& noise, std::mt19937_64& rng)
{
    if (noise.sigma <= 0.0) return;
    std::normal_distribution<double> n(0.0, noise.sigma);
    for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) *= 1.0 + n(rng);
}

} // namespace

MeasuredMap generate_synthetic(const CmmMapModel& truth, std::span<const double> wavelength_nm,
                               std::span<const double> voltage, const NoiseModel& noise, std::uint64_t seed)
{
    truth.rates.validate();
    MeasuredMap m = empty_map(wavelength_nm, voltage);
    const std::vector<double> w = m.omega_grid();
    for (std::size_t i = 0; i < voltage.size(); ++i)
        for (std::size_t j = 0; j < w.size(); ++j)
            m.transmission(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = truth.transmission(w[j], voltage[i]);
    std::mt19937_64 rng(seed);
    add_noise(m.transmission, noise, rng);
    return m;
}

MeasuredMap generate_synthetic(const FdmGeometry& truth, double T_cpl, std::span<const double> wavelength_nm,
                               std::span<const double> voltage, const NoiseModel& noise, std::uint64_t seed)
{
    MeasuredMap m = fdm::transmission_map(truth, wavelength_nm, voltage, T_cpl);
    m.dataset_id = "synthetic";
    std::mt19937_64 rng(seed);
    add_noise(m.transmission, noise, rng);
    return m;
}

std::vector<PumpedDataset> generate_pumped(const CmmMapModel& truth, std::span<const double> voltage,
                                           std::span<const double> delta_nl, double signal_power,
                                           std::span<const double> wavelength_nm, const NoiseModel& noise,
                                           std::uint64_t seed)
{
    if (voltage.size() != delta_nl.size()) throw DomainError("one nonlinear shift per voltage is required");
    truth.rates.validate();
    std::mt19937_64 rng(seed);
    std::vector<PumpedDataset> out;
    for (std::size_t k = 0; k < voltage.size(); ++k) {
        const double V = voltage[k];
        PumpedDataset d;
        d.signal_power = signal_power;
        d.map = empty_map(wavelength_nm, std::span<const double>(&voltage[k], 1));
        d.map.dataset_id = "ds" + std::to_string(k + 1);
        const std::vector<double> w = d.map.omega_grid();
        IdlerSpectra id;
        id.wavelength_nm.assign(wavelength_nm.begin(), wavelength_nm.end());
        Eigen::MatrixXd P(2, static_cast<Eigen::Index>(w.size()));
        for (std::size_t j = 0; j < w.size(); ++j) {
            d.map.transmission(0, static_cast<Eigen::Index>(j)) = truth.transmission(w[j], V, delta_nl[k]);
            P(0, static_cast<Eigen::Index>(j)) = truth.idler_plus(w[j], V, delta_nl[k], signal_power);
            P(1, static_cast<Eigen::Index>(j)) = truth.idler_minus(w[j], V, delta_nl[k], signal_power);
        }
        add_noise(d.map.transmission, noise, rng);
        add_noise(P, noise, rng);
        for (std::size_t j = 0; j < w.size(); ++j) {
            id.p_i_plus.push_back(P(0, static_cast<Eigen::Index>(j)));
            id.p_i_minus.push_back(P(1, static_cast<Eigen::Index>(j)));
        }
        d.map.idler = std::move(id);
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace ringfc::fit
