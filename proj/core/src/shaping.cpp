#include "ringfc/shaping.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/units.hpp"

#include <cmath>
// Boost 1.74 pchip calls isnan unqualified
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace ringfc::shaping {

namespace {

constexpr cplx I{0.0, 1.0};
const double kLn2 = std::log(2.0);

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

std::vector<double> uniform_grid(double a, double b, double h)
{
    const auto n = static_cast<std::size_t>(std::max(4.0, std::ceil((b - a) / h)));
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k) t[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n);
    t.back() = b;
    return t;
}

} // namespace

// ---------------------------------------------------------------- target

struct TargetWavepacket::Interp {
    Pchip s;
    double t_begin, t_end, t_peak;
};

TargetWavepacket TargetWavepacket::gaussian(double fwhm, double t0)
{
    require_positive(fwhm, "fwhm");
    require_finite(t0, "t0");
    TargetWavepacket w;
    w.kind_ = Kind::gaussian;
    w.fwhm_ = fwhm;
    w.t0_ = t0;
    return w;
}

TargetWavepacket TargetWavepacket::sampled(std::vector<double> t, std::vector<double> s)
{
    if (t.size() < 4 || t.size() != s.size()) throw DomainError("sampled wavepacket needs at least 4 matching samples");
    double norm = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (!(t[k] > t[k - 1])) throw DomainError("sample times must increase");
        norm += 0.5 * (s[k] * s[k] + s[k - 1] * s[k - 1]) * (t[k] - t[k - 1]);
    }
    for (double v : s)
        if (!(v >= 0.0)) throw DomainError("sampled wavepacket must be real and non-negative");
    if (!(norm > 0.0)) throw DomainError("sampled wavepacket has zero norm");
    for (double& v : s) v /= std::sqrt(norm);

    const auto peak = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    // crude FWHM of the intensity
    const double half = 0.5 * s[peak] * s[peak];
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && s[lo] * s[lo] > half) --lo;
    while (hi + 1 < s.size() && s[hi] * s[hi] > half) ++hi;

    TargetWavepacket w;
    w.kind_ = Kind::sampled;
    w.t0_ = t[peak];
    w.fwhm_ = std::max(t[hi] - t[lo], t[1] - t[0]);
    const double tb = t.front(), te = t.back(), tp = t[peak];
    w.interp_ = std::make_shared<const Interp>(Interp{Pchip(std::move(t), std::move(s)), tb, te, tp});
    return w;
}

double TargetWavepacket::bandwidth() const { return 4.0 * kLn2 / fwhm_; }

double TargetWavepacket::value(double t) const
{
    if (kind_ == Kind::gaussian) {
        const double x = (t - t0_) / fwhm_;
        return std::sqrt(2.0 / fwhm_) * std::pow(kLn2 / kPi, 0.25) * std::exp(-2.0 * kLn2 * x * x);
    }
    if (t < interp_->t_begin || t > interp_->t_end) return 0.0;
    return std::max(0.0, interp_->s(t));
}

double TargetWavepacket::derivative(double t) const
{
    if (kind_ == Kind::gaussian) return -4.0 * kLn2 * (t - t0_) / (fwhm_ * fwhm_) * value(t);
    if (t < interp_->t_begin || t > interp_->t_end) return 0.0;
    return interp_->s.prime(t);
}

double TargetWavepacket::support_begin() const
{
    return kind_ == Kind::gaussian ? t0_ - 4.0 * fwhm_ : interp_->t_begin;
}

double TargetWavepacket::support_end() const
{
    return kind_ == Kind::gaussian ? t0_ + 4.0 * fwhm_ : interp_->t_end;
}

// ---------------------------------------------------------------- control

struct ControlPulse::Interp {
    Pchip re;
    Pchip im;
};

ControlPulse::ControlPulse(std::vector<double> t, std::vector<cplx> raw, double validity_start, double validity_end)
    : t_(std::move(t)), raw_(std::move(raw)), v0_(validity_start), v1_(validity_end)
{
    if (t_.size() < 4 || t_.size() != raw_.size()) throw DomainError("control needs at least 4 matching samples");
    std::vector<double> x1(t_), x2(t_), re(raw_.size()), im(raw_.size());
    for (std::size_t k = 0; k < raw_.size(); ++k) {
        if (!std::isfinite(raw_[k].real()) || !std::isfinite(raw_[k].imag())) throw DomainError("control sample is not finite");
        re[k] = raw_[k].real();
        im[k] = raw_[k].imag();
    }
    interp_ = std::make_shared<const Interp>(Interp{Pchip(std::move(x1), std::move(re)), Pchip(std::move(x2), std::move(im))});
}

cplx ControlPulse::raw(double t) const
{
    if (!interp_ || t < v0_ || t > v1_ || t < t_.front() || t > t_.back()) return 0.0;
    return {interp_->re(t), interp_->im(t)};
}

cplx ControlPulse::operator()(double t) const
{
    cplx v = raw(t);
    if (env_) v *= beta_ * envelope(t, on_, off_, tenv_);
    return v;
}

std::vector<cplx> ControlPulse::samples() const
{
    std::vector<cplx> out(t_.size());
    for (std::size_t k = 0; k < t_.size(); ++k) {
        cplx v = (t_[k] < v0_ || t_[k] > v1_) ? cplx{} : raw_[k];
        if (env_) v *= beta_ * envelope(t_[k], on_, off_, tenv_);
        out[k] = v;
    }
    return out;
}

std::vector<double> ControlPulse::breakpoints() const
{
    std::vector<double> b{v0_, v1_};
    if (env_) {
        for (double c : {on_, off_}) {
            b.push_back(c - 0.5 * tenv_);
            b.push_back(c + 0.5 * tenv_);
        }
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

double ControlPulse::max_abs() const
{
    double m = 0.0;
    for (const cplx& v : samples()) m = std::max(m, std::abs(v));
    return m;
}

ControlPulse ControlPulse::with_envelope(double tau_on, double tau_off, double tau_env, double beta) const
{
    if (!(tau_on < tau_off)) throw DomainError("tau_on must precede tau_off");
    require_non_negative(tau_env, "tau_env");
    ControlPulse c = *this;
    c.env_ = true;
    c.on_ = tau_on;
    c.off_ = tau_off;
    c.tenv_ = tau_env;
    c.beta_ = beta;
    return c;
}

double envelope_side(double x, double tau_env)
{
    if (tau_env <= 0.0) return x < 0.0 ? 0.0 : (x > 0.0 ? 1.0 : 0.5);
    if (x < -0.5 * tau_env) return 0.0;
    if (x > 0.5 * tau_env) return 1.0;
    return 0.5 * (1.0 + std::sin(kPi * x / tau_env));
}

double envelope(double t, double tau_on, double tau_off, double tau_env)
{
    return envelope_side(t - tau_on, tau_env) * envelope_side(tau_off - t, tau_env);
}

ControlPulse apply_envelope(const ControlPulse& chi, double tau_on, double tau_off, double tau_env, double beta)
{
    return chi.with_envelope(tau_on, tau_off, tau_env, beta);
}

// ---------------------------------------------------------------- synthesis

namespace {

// q = (gamma_o - gamma_L)/2 S + S', with S the emitted (time-reversed input) shape
double q_of(const TargetWavepacket& w, double go, double gl, double t)
{
    return 0.5 * (go - gl) * w.value(t) + w.derivative(t);
}

// F(t) = int_t^te q S e^{-gamma_L t'} dt' for the Gaussian, in closed form.
double gaussian_F(const TargetWavepacket& w, double go, double gl, double t, double te)
{
    const double dt = w.fwhm();
    const double a = 4.0 * kLn2 / (dt * dt);
    const double n2 = (2.0 / dt) * std::sqrt(kLn2 / kPi);
    const double c = w.t0() - gl / (2.0 * a);
    const double x1 = std::sqrt(a) * (t - c);
    const double x2 = std::sqrt(a) * (te - c);
    const double diff = x1 > 0.0 ? std::erfc(x1) - std::erfc(x2) : std::erf(x2) - std::erf(x1);
    const double I = n2 * std::exp(gl * gl / (4.0 * a) - gl * w.t0()) * 0.5 * std::sqrt(kPi / a) * diff;
    const double se = w.value(te), s = w.value(t);
    return 0.5 * go * I + 0.5 * (se * se * std::exp(-gl * te) - s * s * std::exp(-gl * t));
}

} // namespace

double critical_time(const TargetWavepacket& w, double go, double gl)
{
    require_positive(go, "gamma_o");
    require_non_negative(gl, "gamma_L");
    if (!(go > gl)) throw DomainError("gamma_o must exceed gamma_L to emit");
    if (w.kind() == TargetWavepacket::Kind::gaussian)
        return w.t0() + (go - gl) * w.fwhm() / (2.0 * w.bandwidth());
    const double h = w.fwhm() / 400.0;
    double prev_t = w.t0(), prev_q = q_of(w, go, gl, prev_t);
    for (double t = w.t0() + h; t <= w.support_end(); t += h) {
        const double q = q_of(w, go, gl, t);
        if (q < 0.0) return prev_t + (t - prev_t) * prev_q / (prev_q - q);
        prev_t = t;
        prev_q = q;
    }
    return w.support_end();
}

ControlPulse synthesize_control(const TargetWavepacket& w, double go, double gl, const SynthesisOptions& opt)
{
    const double tc = critical_time(w, go, gl);
    const double te = opt.window_end.value_or(tc);
    if (te > tc * (1.0 + 1e-12) + 1e-300)
        throw PositivityViolation("synthesis window extends past the positivity limit", tc);
    if (!(te > opt.t_start)) throw DomainError("synthesis window is empty");
    const double h = opt.time_step > 0.0 ? opt.time_step
                                         : std::min(2.0 * kPi / (40.0 * std::max(go, w.bandwidth())), w.fwhm() / 200.0);
    std::vector<double> t = uniform_grid(opt.t_start, te, h);
    std::vector<cplx> chi(t.size());

    const bool gauss = w.kind() == TargetWavepacket::Kind::gaussian;
    std::vector<double> F(t.size(), 0.0);
    if (!gauss) {
        // cumulative trapezoid from the anchor backwards
        for (std::size_t k = t.size() - 1; k-- > 0;) {
            const double fa = q_of(w, go, gl, t[k]) * w.value(t[k]) * std::exp(-gl * t[k]);
            const double fb = q_of(w, go, gl, t[k + 1]) * w.value(t[k + 1]) * std::exp(-gl * t[k + 1]);
            F[k] = F[k + 1] + 0.5 * (fa + fb) * (t[k + 1] - t[k]);
        }
    }
    const double near = 1e-7 * w.fwhm();
    for (std::size_t k = 0; k < t.size(); ++k) {
        double v;
        if (te - t[k] < near) {
            // anchor: chi -> sqrt(-q'/S), finite
            const double d = 1e-4 * w.fwhm();
            const double qp = (q_of(w, go, gl, te) - q_of(w, go, gl, te - d)) / d;
            v = gauss && te == tc ? std::sqrt(w.bandwidth() / w.fwhm()) : std::sqrt(std::max(0.0, -qp / w.value(te)));
        } else {
            const double Fk = gauss ? gaussian_F(w, go, gl, t[k], te) : F[k];
            const double q = q_of(w, go, gl, t[k]);
            if (q < 0.0) throw PositivityViolation("f_o turns negative inside the synthesis window", tc);
            v = Fk > 0.0 ? q * std::exp(-0.5 * gl * t[k]) / std::sqrt(2.0 * Fk) : 0.0;
        }
        chi[k] = v;
    }
    return ControlPulse(std::move(t), std::move(chi), opt.t_start, te);
}

// ---------------------------------------------------------------- dynamics

namespace {

namespace ode = boost::numeric::odeint;

template <class State, class Rhs, class Obs>
void run_ode(Rhs rhs, State& x, std::vector<double> times, double rel, double abs, double max_dt, Obs obs)
{
    auto stepper = ode::make_controlled(abs, rel, max_dt, ode::runge_kutta_fehlberg78<State>());
    try {
        ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), std::min(max_dt, times[1] - times[0]), obs);
    } catch (const ode::odeint_error& e) {
        throw StiffnessError(std::string("integrator step size collapsed (reduce g or refine the grid): ") + e.what());
    }
}

std::vector<double> merge_times(std::vector<double> grid, const std::vector<double>& extra, double a, double b)
{
    for (double e : extra)
        if (e > a && e < b) grid.push_back(e);
    std::sort(grid.begin(), grid.end());
    std::vector<double> out;
    for (double v : grid)
        if (out.empty() || v - out.back() > 1e-12 * (b - a)) out.push_back(v);
    out.back() = b;
    return out;
}

} // namespace

EmissionResult integrate_emission(const CmmParams& cmm, const ControlPulse& chi, const EmissionOptions& opt)
{
    cmm.validate();
    const double go = cmm.coupling_o();
    const double gl = cmm.loss_ring1();
    const double gl2 = cmm.gamma_L2;
    const double Go = go + gl;
    const double g = cmm.g;
    const double dab = cmm.detuning();
    const double leak = opt.signal_leak;
    const bool four = opt.down_converted_mode;
    const TargetWavepacket* target = opt.target;

    const std::vector<double> bps = chi.breakpoints();
    double T = opt.t_end;
    if (T <= 0.0) {
        double base = chi.time().empty() ? 0.0 : chi.time().back();
        for (double b : bps) base = std::max(base, b);
        T = base + (target ? 4.0 * target->fwhm() : 20.0 / Go);
    }
    const double fastest = std::max({Go, g, chi.max_abs(), 1e-300});
    double h = opt.output_step;
    if (h <= 0.0) {
        h = 2.0 * kPi / (40.0 * fastest);
        if (target) h = std::min(h, target->fwhm() / 200.0);
    }
    const std::vector<double> times = merge_times(uniform_grid(0.0, T, h), bps, 0.0, T);

    using State = std::array<double, 12>;
    auto rhs = [&](const State& x, State& dx, double t) {
        const cplx Ao{x[0], x[1]}, As{x[2], x[3]}, Am{x[4], x[5]}, B{x[6], x[7]};
        const cplx c = chi(t);
        const cplx dAo = -0.5 * Go * Ao - I * c * As;
        cplx dAs = -0.5 * (gl + leak) * As - I * c * Ao;
        cplx dAm = 0.0, dB = 0.0;
        if (four) {
            dAs += -I * c * Am;
            dAm = -0.5 * Go * Am - I * c * As - I * g * B;
            dB = (-I * dab - 0.5 * gl2) * B - I * g * Am;
        }
        dx[0] = dAo.real(); dx[1] = dAo.imag();
        dx[2] = dAs.real(); dx[3] = dAs.imag();
        dx[4] = dAm.real(); dx[5] = dAm.imag();
        dx[6] = dB.real(); dx[7] = dB.imag();
        dx[8] = go * std::norm(Ao);
        dx[9] = go * std::norm(Am);
        const cplx ov = target ? std::conj(std::sqrt(go) * Ao) * target->value(t) : cplx{};
        dx[10] = ov.real();
        dx[11] = ov.imag();
    };

    EmissionResult r;
    State x{};
    x[2] = 1.0;
    auto obs = [&](const State& s, double t) {
        const cplx Ao{s[0], s[1]};
        r.t.push_back(t);
        r.chi.push_back(chi(t));
        r.S_out.push_back(std::sqrt(go) * Ao);
        r.occ_o.push_back(std::norm(Ao));
        r.occ_s.push_back(s[2] * s[2] + s[3] * s[3]);
        r.occ_minus.push_back(s[4] * s[4] + s[5] * s[5]);
        r.occ_B.push_back(s[6] * s[6] + s[7] * s[7]);
    };
    const double max_dt = 2.0 * kPi / (20.0 * fastest);
    run_ode<State>(rhs, x, times, opt.rel_tol, opt.abs_tol, max_dt, obs);
    r.eta_out = x[8];
    r.eta_down = x[9];
    const double ov = x[10] * x[10] + x[11] * x[11];
    r.overlap = r.eta_out > 0.0 ? ov / r.eta_out : 0.0;
    return r;
}

AbsorptionResult integrate_absorption(double go, double gl, const ControlPulse& chi, const TargetWavepacket& target,
                                      double rel_tol, double abs_tol)
{
    require_positive(go, "gamma_o");
    require_non_negative(gl, "gamma_L");
    const double Go = go + gl;
    const double start = -std::max(chi.validity_end(), target.support_end());
    std::vector<double> bps;
    for (double b : chi.breakpoints()) bps.push_back(-b);
    const double fastest = std::max({Go, chi.max_abs(), target.bandwidth()});
    const double h = std::min(2.0 * kPi / (40.0 * fastest), target.fwhm() / 200.0);
    const std::vector<double> times = merge_times(uniform_grid(start, 0.0, h), bps, start, 0.0);

    using State = std::array<double, 5>;
    auto rhs = [&](const State& x, State& dx, double tau) {
        const cplx Ao{x[0], x[1]}, As{x[2], x[3]};
        const cplx c = chi(-tau);
        const double s = target.value(-tau);
        const cplx dAo = -0.5 * Go * Ao - I * c * As + std::sqrt(go) * s;
        const cplx dAs = -0.5 * gl * As - I * c * Ao;
        dx[0] = dAo.real(); dx[1] = dAo.imag();
        dx[2] = dAs.real(); dx[3] = dAs.imag();
        dx[4] = std::norm(s - std::sqrt(go) * Ao);
    };
    State x{};
    run_ode<State>(rhs, x, times, rel_tol, abs_tol, 2.0 * kPi / (20.0 * fastest), [](const State&, double) {});
    return {{x[2], x[3]}, {x[0], x[1]}, x[4]};
}

// ---------------------------------------------------------------- design + sweep

CmmParams EmissionDesign::cmm() const
{
    require_positive(gamma_o, "gamma_o");
    require_positive(ql_over_qo, "ql_over_qo");
    require_non_negative(G, "G");
    CmmParams p;
    p.gamma = gamma_o;
    p.gamma_o = gamma_o;
    p.gamma_L1 = gamma_o / ql_over_qo;
    p.gamma_L2 = p.gamma_L1;
    p.g = G * std::sqrt(p.gamma_L1 * (gamma_o + p.gamma_L1));
    return p;
}

TargetWavepacket EmissionDesign::target() const
{
    require_positive(dw_over_gamma, "dw_over_gamma");
    const double dw = dw_over_gamma * gamma_o;
    const double dt = 4.0 * kLn2 / dw;
    return TargetWavepacket::gaussian(dt, t0_over_dt * dt);
}

ControlPulse EmissionDesign::control() const
{
    const CmmParams p = cmm();
    const TargetWavepacket w = target();
    const ControlPulse raw = synthesize_control(w, p.coupling_o(), p.loss_ring1());
    const double dt = w.fwhm();
    const double on = tau_on_over_dt * dt;
    const double off = tau_off_over_dt ? *tau_off_over_dt * dt : raw.validity_end();
    const double env = tau_env_over_dt ? *tau_env_over_dt * dt : 2.0 * on;
    return apply_envelope(raw, on, off, env, beta);
}

EmissionResult evaluate_design(const EmissionDesign& d, EmissionOptions opt)
{
    const TargetWavepacket w = d.target();
    opt.target = &w;
    return integrate_emission(d.cmm(), d.control(), opt);
}

namespace {

struct Evaluation {
    double objective;
    double eta;
    double ol;
};

} // namespace

SweepCell optimize_cell(double G, double ql, const SweepOptions& opt, std::optional<SweepBest> seed)
{
    SweepCell cell{G, ql, std::nullopt, 0};
    EmissionOptions eo;
    eo.rel_tol = opt.rel_tol;
    auto eval = [&](const std::array<double, 3>& x) -> Evaluation {
        ++cell.evaluations;
        const double on = x[0], beta = x[1], r = x[2];
        if (on < 0.01 || beta < 0.5 || beta > 2.0 || r < 0.02 || r > 2.0)
            return {std::numeric_limits<double>::infinity(), 0.0, 0.0};
        EmissionDesign d;
        d.G = G;
        d.ql_over_qo = ql;
        d.dw_over_gamma = r;
        d.t0_over_dt = opt.t0_over_dt;
        d.tau_on_over_dt = on;
        d.beta = beta;
        try {
            const EmissionResult e = evaluate_design(d, eo);
            const double f = e.overlap >= opt.ol_floor ? -e.eta_out : 1.0 + (opt.ol_floor - e.overlap);
            return {f, e.eta_out, e.overlap};
        } catch (const Error&) {
            return {std::numeric_limits<double>::infinity(), 0.0, 0.0};
        }
    };

    std::array<double, 3> x = seed ? std::array<double, 3>{seed->tau_on_over_dt, seed->beta, seed->dw_over_gamma}
                                   : std::array<double, 3>{opt.seed_tau_on, opt.seed_beta, opt.seed_dw};
    std::array<double, 3> step{0.05, 0.02, 0.04};
    Evaluation best = eval(x);

    // Hooke-Jeeves: coordinate polling plus a pattern move along the last improvement.
    auto explore = [&](std::array<double, 3> base, Evaluation fb) {
        for (int d = 0; d < 3; ++d) {
            for (double s : {+1.0, -1.0}) {
                std::array<double, 3> y = base;
                y[d] += s * step[d];
                const Evaluation fy = eval(y);
                if (fy.objective < fb.objective) {
                    base = y;
                    fb = fy;
                    break;
                }
            }
        }
        return std::pair{base, fb};
    };
    while (cell.evaluations < opt.max_evaluations) {
        auto [y, fy] = explore(x, best);
        if (fy.objective < best.objective) {
            while (cell.evaluations < opt.max_evaluations) {
                std::array<double, 3> p;
                for (int d = 0; d < 3; ++d) p[d] = y[d] + (y[d] - x[d]);
                x = y;
                best = fy;
                const Evaluation fp = eval(p);
                auto [z, fz] = explore(p, fp);
                if (fz.objective < best.objective) {
                    y = z;
                    fy = fz;
                } else {
                    break;
                }
            }
        } else {
            bool small = true;
            for (int d = 0; d < 3; ++d) {
                step[d] *= 0.5;
                if (step[d] > opt.step_tolerance) small = false;
            }
            if (small) break;
        }
    }
    if (std::isfinite(best.objective) && best.ol >= opt.ol_floor)
        cell.best = SweepBest{best.eta, best.ol, x[2], x[0], x[1]};
    return cell;
}

std::vector<SweepCell> sweep_figures_of_merit(std::span<const double> G_list, std::span<const double> ql_list,
                                              const SweepOptions& opt, int jobs)
{
    std::vector<SweepCell> out(G_list.size() * ql_list.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    // rows run in parallel; cells in a row are seeded from their solved neighbour
    auto worker = [&] {
        for (std::size_t i; (i = next++) < G_list.size();) {
            try {
                std::optional<SweepBest> seed;
                for (std::size_t j = 0; j < ql_list.size(); ++j) {
                    SweepCell c = optimize_cell(G_list[i], ql_list[j], opt, seed);
                    if (c.best) seed = c.best;
                    out[i * ql_list.size() + j] = c;
                }
            } catch (...) {
                std::lock_guard lk(m);
                if (!err) err = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(jobs, static_cast<int>(G_list.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return out;
}

} // namespace ringfc::shaping
