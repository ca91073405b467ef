#include "ringfc/fdm.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/units.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ringfc::fdm {

namespace {

constexpr cplx I{0.0, 1.0};

double wrap(double a)
{
    a = std::remainder(a, 2.0 * kPi);
    return a <= -kPi ? a + 2.0 * kPi : a;
}

} // namespace

CouplerMatrix CouplerMatrix::directional(double nu, double theta)
{
    if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("coupler nu must lie in [0, 1]");
    const double k = std::sqrt(1.0 - nu * nu);
    CouplerMatrix c;
    c.kind = CouplerKind::directional;
    c.phase = theta;
    c.m << nu, I * k, I * k, nu;
    c.m *= std::exp(I * theta);
    return c;
}

CouplerMatrix CouplerMatrix::interferometric(double nu, double psi, double psi_R, double asymmetry)
{
    if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("coupler nu must lie in [0, 1]");
    const double na = nu;
    const double nb = std::clamp(nu * (1.0 + asymmetry), 0.0, 1.0);
    const double ka = std::sqrt(1.0 - na * na);
    const double kb = std::sqrt(1.0 - nb * nb);
    const cplx e = std::exp(I * psi);
    CouplerMatrix c;
    c.kind = CouplerKind::interferometric;
    c.phase = psi_R;
    c.psi = psi;
    // second coupler * diag(1, e^{i psi}) * first coupler
    c.m << na * nb - ka * kb * e, I * (nb * ka + kb * na * e),
           I * (kb * na + nb * ka * e), nb * na * e - kb * ka;
    c.m *= std::exp(I * psi_R);
    return c;
}

Eigen::Matrix2cd CouplerMatrix::barred() const { return m * std::exp(-I * phase); }

cplx propagation_constant(const FdmGeometry& geom, double omega, double V_heat, int ring)
{
    const double n_re = ring == 1 ? thermal_index(geom.n_eff_re, geom.dnV, V_heat) : geom.n_eff_re;
    const cplx n{n_re, geom.n_eff_im};
    return n * geom.omega_ref / kSpeedOfLight + geom.n_g * (omega - geom.omega_ref) / kSpeedOfLight;
}

cplx ring2_pass_transmission(const FdmGeometry& geom, double omega)
{
    const Eigen::Matrix2cd C = CouplerMatrix::directional(geom.nu2, geom.theta2).m;
    const cplx e = std::exp(I * propagation_constant(geom, omega, 0.0, 2) * geom.L2);
    return C(1, 1) + C(0, 1) * C(1, 0) * e / (1.0 - C(0, 0) * e);
}

CouplerMatrix ring1_coupler(const FdmGeometry& geom, double omega)
{
    if (!geom.mzi) return CouplerMatrix::directional(geom.nu1, geom.theta1);
    const MziConfig& z = *geom.mzi;
    const double psi = z.psi + geom.n_g * (omega - geom.omega_ref) * z.delta_L / kSpeedOfLight;
    return CouplerMatrix::interferometric(z.nu, psi, z.psi_R, z.asymmetry);
}

cplx bus_transmission(const FdmGeometry& geom, double omega, double V_heat)
{
    const Eigen::Matrix2cd C = ring1_coupler(geom, omega).m;
    const cplx t12 = ring2_pass_transmission(geom, omega);
    const cplx e = std::exp(I * propagation_constant(geom, omega, V_heat, 1) * geom.L1) * t12;
    return C(1, 1) + C(0, 1) * C(1, 0) * e / (1.0 - C(0, 0) * e);
}

InterferometricResponse intracavity_buildup_interferometric(const FdmGeometry& geom, double omega)
{
    if (!geom.mzi) throw ConfigError("interferometric coupling requested but geometry has no mzi section");
    const CouplerMatrix C = ring1_coupler(geom, omega);
    const Eigen::Matrix2cd Cb = C.barred();
    const cplx t12b = ring2_pass_transmission(geom, omega) * std::exp(-I * geom.theta2);
    const cplx Phi1 = propagation_constant(geom, omega, 0.0, 1) * geom.L1 + C.phase;
    return {1.0 / (1.0 - Cb(0, 0) * std::exp(I * Phi1) * t12b), std::norm(C.m(0, 1))};
}

ModeLayout plan_mode_layout(int n_modes)
{
    if (n_modes < 1) throw DomainError("n_modes must be at least 1");
    ModeLayout L;
    L.n_lo = -(n_modes - 1) / 2;
    L.n_hi = L.n_lo + n_modes - 1;
    int jmin = -1, jmax = ModeLayout::output;
    for (int n = L.n_lo; n <= L.n_hi; ++n) {
        L.n.push_back(n);
        L.signal.push_back(ModeLayout::signal_index(n));
        L.idler.push_back(ModeLayout::idler_index(n));
        L.suppressed_targets.push_back(-5 + 12 * n);
        jmin = std::min({jmin, L.signal.back(), L.idler.back(), L.suppressed_targets.back()});
        jmax = std::max({jmax, L.signal.back(), L.idler.back(), L.suppressed_targets.back()});
    }
    L.suppressed_targets.push_back(-1);
    for (int j = jmin; j <= jmax; ++j)
        if (ModeLayout::is_ring2_split(j)) L.ring2_split.push_back(j);

    L.symmetric = true;
    for (int n : L.n) {
        const int a = std::abs(ModeLayout::signal_index(n) - ModeLayout::output);
        const int b = std::abs(ModeLayout::output - ModeLayout::signal_index(1 - n));
        if (a != b) L.symmetric = false;
    }
    L.targets_split = true;
    for (int j : L.suppressed_targets)
        if (!ModeLayout::is_ring2_split(j)) L.targets_split = false;
    return L;
}

PhaseCurves round_trip_phase_diagnostic(const FdmGeometry& geom, std::span<const double> omega_grid, double V_heat)
{
    PhaseCurves pc;
    for (double w : omega_grid) {
        const CouplerMatrix C = ring1_coupler(geom, w);
        const cplx Phi1 = propagation_constant(geom, w, V_heat, 1) * geom.L1 + C.phase;
        const double a = std::arg(C.barred()(0, 0) * std::exp(I * Phi1.real()));
        const double b = std::arg(ring2_pass_transmission(geom, w) * std::exp(-I * geom.theta2));
        pc.omega.push_back(w);
        pc.coupler.push_back(a);
        pc.ring2.push_back(b);
        pc.total.push_back(wrap(a + b));
    }
    return pc;
}

std::vector<double> phase_resonances(const PhaseCurves& pc)
{
    std::vector<double> out;
    for (std::size_t i = 1; i < pc.total.size(); ++i) {
        const double a = pc.total[i - 1], b = pc.total[i];
        if (a < 0.0 && b >= 0.0 && b - a < kPi) {
            const double f = -a / (b - a);
            out.push_back(pc.omega[i - 1] + f * (pc.omega[i] - pc.omega[i - 1]));
        }
    }
    return out;
}

double align_index(double n_guess, double omega, double L1, double L2)
{
    require_positive(omega, "omega");
    const double ratio = L1 / L2;
    const double r = std::round(ratio);
    const double step = std::abs(ratio - r) < 1e-9 ? r : 1.0;
    const double m = std::round(n_guess * omega * L1 / (2.0 * kPi * kSpeedOfLight) / step) * step;
    return 2.0 * kPi * kSpeedOfLight * m / (omega * L1);
}

FdmGeometry geometry_from_rates(const RateDesign& d)
{
    FdmGeometry g;
    g.L1 = d.L1;
    g.L2 = d.L2;
    g.n_g = d.n_g;
    g.omega_ref = d.omega;
    g.n_eff_re = align_index(d.n_eff_guess, d.omega, d.L1, d.L2);
    g.n_eff_im = d.gamma_L * d.n_g / (2.0 * d.omega);
    g.nu1 = nu_from_gamma(d.gamma1, d.L1, d.n_g);
    g.nu2 = nu_from_gamma(d.gamma2, d.L2, d.n_g);
    g.validate();
    return g;
}

MeasuredMap transmission_map(const FdmGeometry& geom, std::span<const double> wavelength_nm,
                             std::span<const double> voltage, double T_cpl)
{
    geom.validate();
    MeasuredMap m;
    m.wavelength_nm.assign(wavelength_nm.begin(), wavelength_nm.end());
    m.voltage.assign(voltage.begin(), voltage.end());
    m.transmission.resize(static_cast<Eigen::Index>(voltage.size()), static_cast<Eigen::Index>(wavelength_nm.size()));
    const std::vector<double> w = m.omega_grid();
    for (std::size_t i = 0; i < voltage.size(); ++i)
        for (std::size_t j = 0; j < w.size(); ++j)
            m.transmission(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                = T_cpl * T_cpl * std::norm(bus_transmission(geom, w[j], voltage[i]));
    return m;
}

std::optional<std::string> span_warning(const FdmGeometry& geom, double omega_min, double omega_max)
{
    const double n = std::abs(omega_max - omega_min) / geom.fsr1();
    if (n <= 10.0) return std::nullopt;
    std::ostringstream os;
    os << "requested span covers " << n << " FSRs; linear dispersion is only trusted over 10";
    return os.str();
}

} // namespace ringfc::fdm
