#include "ringfc/params.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/units.hpp"

#include <cmath>
#include <string>

namespace ringfc {

void CmmParams::validate() const
{
    require_non_negative(gamma, "gamma");
    require_non_negative(gamma_L1, "gamma_L1");
    require_non_negative(gamma_L2, "gamma_L2");
    require_non_negative(gamma_FCA, "gamma_FCA");
    require_non_negative(g, "g");
    require_finite(delta_ab, "delta_ab");
    require_finite(delta_NL, "delta_NL");
    require_finite(chi_bar, "chi_bar");
    if (gamma_s) require_non_negative(*gamma_s, "gamma_s");
    if (gamma_i_plus) require_non_negative(*gamma_i_plus, "gamma_i_plus");
    if (gamma_i_minus) require_non_negative(*gamma_i_minus, "gamma_i_minus");
    if (gamma_o) require_non_negative(*gamma_o, "gamma_o");
    if (!(total_s() > 0.0) || !(total_i_plus() > 0.0) || !(total_i_minus() > 0.0))
        throw DomainError("total rate Gamma must be positive for every ring-1 mode");
}

double normalized_coupling(const CmmParams& p)
{
    const double denom = p.gamma_L2 * p.total_i_minus();
    if (denom <= 0.0)
        return p.g > 0.0 ? INFINITY : 0.0;
    return p.g / std::sqrt(denom);
}

double FdmGeometry::fsr1() const { return 2.0 * kPi * kSpeedOfLight / (n_g * L1); }
double FdmGeometry::fsr2() const { return 2.0 * kPi * kSpeedOfLight / (n_g * L2); }

void FdmGeometry::validate() const
{
    require_positive(L1, "L1");
    require_positive(L2, "L2");
    require_positive(n_g, "n_g");
    require_non_negative(n_eff_im, "n_eff_im");
    require_finite(n_eff_re, "n_eff_re");
    require_finite(omega_ref, "omega_ref");
    if (!(nu1 >= 0.0 && nu1 <= 1.0)) throw DomainError("nu1 must lie in [0, 1]");
    if (!(nu2 >= 0.0 && nu2 <= 1.0)) throw DomainError("nu2 must lie in [0, 1]");
    if (mzi && !(mzi->nu >= 0.0 && mzi->nu <= 1.0)) throw DomainError("mzi.nu must lie in [0, 1]");
}

void PumpConfig::validate() const
{
    require_non_negative(P_p1, "P_p1");
    require_non_negative(P_p2, "P_p2");
    require_non_negative(P_s, "P_s");
    require_non_negative(n2, "n2");
    require_non_negative(V_ring, "V_ring");
    if (!(T_cpl > 0.0 && T_cpl <= 1.0)) throw DomainError("T_cpl must lie in (0, 1]");
}

double default_mode_volume(double L1) { return L1 * kWaveguideWidth * kWaveguideHeight; }

double gamma_from_nu(double nu, double L, double n_g)
{
    if (!(L > 0.0)) throw DomainError("L must be positive");
    if (!(n_g > 0.0)) throw DomainError("n_g must be positive");
    if (!(nu <= 1.0) || nu < 0.0) throw DomainError("nu must lie in (0, 1]");
    if (nu == 0.0) throw DomainError("nu = 0 gives an infinite rate");
    return -(kSpeedOfLight / (n_g * L)) * std::log(nu * nu);
}

double nu_from_gamma(double gamma, double L, double n_g)
{
    require_non_negative(gamma, "gamma");
    require_positive(L, "L");
    require_positive(n_g, "n_g");
    return std::exp(-gamma * n_g * L / (2.0 * kSpeedOfLight));
}

namespace {

// Continuous phase condition for the ring-1 resonance pulled by ring 2.
// h(0+) = -pi and h rises monotonically while the root is in (0, FSR1/2).
double splitting_phase(double dw, double nu2, double t1, double t2)
{
    const double x = t2 * dw;
    return t1 * dw + std::atan2(-(1.0 - nu2 * nu2) * std::sin(x), 2.0 * nu2 - (1.0 + nu2 * nu2) * std::cos(x));
}

} // namespace

Splitting ring_splitting(const FdmGeometry& geom, double gamma_i)
{
    require_positive(geom.L1, "L1");
    require_positive(geom.L2, "L2");
    require_positive(geom.n_g, "n_g");
    require_non_negative(gamma_i, "gamma_i");
    const double nu2 = geom.nu2;
    if (!(nu2 > 0.0 && nu2 <= 1.0)) throw DomainError("nu2 must lie in (0, 1]");
    if (nu2 == 1.0) return {0.0, gamma_i / 4.0};

    const double t1 = geom.n_g * geom.L1 / kSpeedOfLight;
    const double t2 = geom.n_g * geom.L2 / kSpeedOfLight;
    const double fsr = geom.fsr1();
    double lo = 1e-15 * fsr;
    double hi = 0.5 * fsr;
    double flo = splitting_phase(lo, nu2, t1, t2);
    double fhi = splitting_phase(hi, nu2, t1, t2);
    if (!(flo < 0.0 && fhi > 0.0))
        throw NoSplittingError("no splitting root in (0, FSR/2); ring-ring coupling too weak");
    while (hi - lo > 1e-12 * fsr) {
        const double mid = 0.5 * (lo + hi);
        const double fm = splitting_phase(mid, nu2, t1, t2);
        if (fm < 0.0) lo = mid;
        else hi = mid;
    }
    const double dw = 0.5 * (lo + hi);
    return {dw, std::sqrt(dw * dw + 0.0625 * gamma_i * gamma_i)};
}

double g_from_geometry(const FdmGeometry& geom, double gamma_i) { return ring_splitting(geom, gamma_i).g; }

double nu2_for_coupling(const FdmGeometry& geom, double g, double gamma_i)
{
    require_positive(g, "g");
    if (g <= gamma_i / 4.0) throw DomainError("g must exceed gamma_i/4 for a splitting");
    // g decreases monotonically in nu2
    double lo = 1e-6, hi = 1.0 - 1e-15;
    FdmGeometry trial = geom;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        trial.nu2 = 0.5 * (lo + hi);
        double gm;
        try {
            gm = g_from_geometry(trial, gamma_i);
        } catch (const NoSplittingError&) {
            gm = 0.0;
        }
        if (gm > g) lo = trial.nu2;
        else hi = trial.nu2;
    }
    return 0.5 * (lo + hi);
}

double chi_bar_estimate(const PumpConfig& pump, const CmmParams& cmm, double omega_ref, double n_eff_re)
{
    pump.validate();
    if (!(pump.V_ring > 0.0)) throw DomainError("V_ring must be positive");
    require_positive(omega_ref, "omega_ref");
    require_positive(n_eff_re, "n_eff_re");
    const double G1 = cmm.total_i_plus();
    require_positive(G1, "Gamma_1");
    const double pre = 8.0 * omega_ref * kSpeedOfLight * pump.n2 / (n_eff_re * n_eff_re * pump.V_ring);
    return pre * (cmm.gamma / (G1 * G1)) * std::sqrt(pump.P_p1 * pump.P_p2);
}

double heater_detuning(double A, double B, double V) { return A + B * V * V; }

double thermal_index(double n0, double dnV, double V) { return n0 + dnV * V * V; }

double heater_zero_voltage(double A, double B)
{
    if (B == 0.0 || -A / B < 0.0) throw DomainError("heater detuning has no real zero");
    return std::sqrt(-A / B);
}

} // namespace ringfc
