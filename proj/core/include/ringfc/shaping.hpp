#pragma once

#include "ringfc/params.hpp"

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace ringfc::shaping {

using cplx = std::complex<double>;

class TargetWavepacket {
public:
    enum class Kind { gaussian, sampled };

    // Unit-norm Gaussian with intensity FWHM dt centred at t0.
    static TargetWavepacket gaussian(double fwhm, double t0);
    // Real, non-negative samples on a uniform grid; renormalized to unit norm.
    static TargetWavepacket sampled(std::vector<double> t, std::vector<double> s);

    Kind kind() const { return kind_; }
    double fwhm() const { return fwhm_; }
    double t0() const { return t0_; }
    double bandwidth() const;  // 4 ln2 / fwhm
    double value(double t) const;
    double derivative(double t) const;
    double support_begin() const;
    double support_end() const;

private:
    struct Interp;
    Kind kind_ = Kind::gaussian;
    double fwhm_ = 1.0;
    double t0_ = 0.0;
    std::shared_ptr<const Interp> interp_;
};

// Control in emission time. chi(t) = beta * F_env(t) * raw(t) inside [validity_start, validity_end].
class ControlPulse {
public:
    ControlPulse() = default;
    ControlPulse(std::vector<double> t, std::vector<cplx> raw, double validity_start, double validity_end);

    cplx operator()(double t) const;
    cplx raw(double t) const;
    std::vector<cplx> samples() const;  // enveloped values on the stored grid
    const std::vector<double>& time() const { return t_; }
    // Points where chi or its derivative may be discontinuous.
    std::vector<double> breakpoints() const;

    double validity_start() const { return v0_; }
    double validity_end() const { return v1_; }
    bool has_envelope() const { return env_; }
    double tau_on() const { return on_; }
    double tau_off() const { return off_; }
    double tau_env() const { return tenv_; }
    double beta() const { return beta_; }
    double max_abs() const;

    ControlPulse with_envelope(double tau_on, double tau_off, double tau_env, double beta) const;

private:
    struct Interp;
    std::vector<double> t_;
    std::vector<cplx> raw_;
    std::shared_ptr<const Interp> interp_;
    double v0_ = 0.0;
    double v1_ = 0.0;
    bool env_ = false;
    double on_ = 0.0, off_ = 0.0, tenv_ = 0.0, beta_ = 1.0;
};

// One side of the envelope: 0 below -tau_env/2, half-sine ramp, 1 above tau_env/2.
double envelope_side(double x, double tau_env);
double envelope(double t, double tau_on, double tau_off, double tau_env);

// Latest emission time for which the control stays real (f_o >= 0 before it).
double critical_time(const TargetWavepacket& target, double gamma_o, double gamma_L);

struct SynthesisOptions {
    double t_start = 0.0;
    std::optional<double> window_end;  // defaults to the critical time
    double time_step = 0.0;            // 0: min(2 pi / (40 max rate), dt / 200)
};

// chi_out(t) = chi_in(-t) with C1 = 0.
ControlPulse synthesize_control(const TargetWavepacket& target, double gamma_o, double gamma_L,
                                const SynthesisOptions& opt = {});

ControlPulse apply_envelope(const ControlPulse& chi, double tau_on, double tau_off, double tau_env, double beta);

struct EmissionOptions {
    double t_end = 0.0;  // 0: last breakpoint + 4 fwhm of the target (or grid end)
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double output_step = 0.0;  // 0: same rule as the synthesis grid
    double signal_leak = 0.0;  // residual signal-bus coupling
    bool down_converted_mode = true;
    const TargetWavepacket* target = nullptr;  // for the overlap
};

struct EmissionResult {
    std::vector<double> t;
    std::vector<cplx> chi;
    std::vector<cplx> S_out;
    std::vector<double> occ_s, occ_o, occ_minus, occ_B;
    double eta_out = 0.0;   // integral |S_out|^2
    double eta_down = 0.0;  // flux leaving through the down-converted mode
    double overlap = 0.0;   // |<S_out|S_target>|^2 / eta_out
    double final_population() const { return occ_s.back() + occ_o.back() + occ_minus.back() + occ_B.back(); }
};

// Uses coupling_o(), loss_ring1() as gamma_L, gamma_L2, g and detuning() of cmm.
EmissionResult integrate_emission(const CmmParams& cmm, const ControlPulse& chi, const EmissionOptions& opt = {});

struct AbsorptionResult {
    cplx A_s;
    cplx A_o;
    double reflected = 0.0;  // integral |S_in - sqrt(gamma_o) A_o|^2
};

// Drives S_in(tau) = target(-tau) into mode o under chi_in(tau) = chi(-tau), tau from -t_end to 0.
AbsorptionResult integrate_absorption(double gamma_o, double gamma_L, const ControlPulse& chi,
                                      const TargetWavepacket& target, double rel_tol = 1e-10, double abs_tol = 1e-13);

// Dimensionless design point used for the figures of merit.
struct EmissionDesign {
    double gamma_o = 1e10;
    double G = 100.0;
    double ql_over_qo = 500.0;
    double dw_over_gamma = 0.38;
    double t0_over_dt = 3.83;
    double tau_on_over_dt = 0.42;
    std::optional<double> tau_off_over_dt;  // default: validity end
    std::optional<double> tau_env_over_dt;  // default: 2 tau_on
    double beta = 1.0;

    CmmParams cmm() const;
    TargetWavepacket target() const;
    ControlPulse control() const;
};

EmissionResult evaluate_design(const EmissionDesign& d, EmissionOptions opt = {});

struct SweepOptions {
    double ol_floor = 0.99;
    double t0_over_dt = 3.83;
    double seed_tau_on = 0.42;
    double seed_beta = 1.06;
    double seed_dw = 0.38;
    int max_evaluations = 400;
    double step_tolerance = 1e-3;
    double rel_tol = 1e-8;
};

struct SweepBest {
    double eta_out;
    double overlap;
    double dw_over_gamma;
    double tau_on_over_dt;
    double beta;
};

struct SweepCell {
    double G;
    double ql_over_qo;
    std::optional<SweepBest> best;  // empty when no point met the floor
    int evaluations = 0;
};

SweepCell optimize_cell(double G, double ql_over_qo, const SweepOptions& opt, std::optional<SweepBest> seed = std::nullopt);
std::vector<SweepCell> sweep_figures_of_merit(std::span<const double> G_list, std::span<const double> ql_list,
                                              const SweepOptions& opt = {}, int jobs = 1);

} // namespace ringfc::shaping
