#pragma once

#include "ringfc/data.hpp"
#include "ringfc/params.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ringfc::fdm {

using cplx = std::complex<double>;

enum class CouplerKind { directional, interferometric };

struct CouplerMatrix {
    Eigen::Matrix2cd m;
    CouplerKind kind = CouplerKind::directional;
    double phase = 0.0;  // theta or psi_R, the global phase factored out by the barred form
    double psi = 0.0;    // interferometric only

    static CouplerMatrix directional(double nu, double theta);
    // nu_b = nu * (1 + asymmetry) for the second coupler
    static CouplerMatrix interferometric(double nu, double psi, double psi_R, double asymmetry = 0.0);

    Eigen::Matrix2cd barred() const;  // m * exp(-i phase)
    cplx operator()(int r, int c) const { return m(r, c); }
};

// Complex propagation constant (1/m). Ring 1 carries the heater term.
cplx propagation_constant(const FdmGeometry& geom, double omega, double V_heat, int ring);

cplx ring2_pass_transmission(const FdmGeometry& geom, double omega);
cplx bus_transmission(const FdmGeometry& geom, double omega, double V_heat = 0.0);

// Coupler used between bus and ring 1 at this frequency: directional unless geom.mzi is set.
CouplerMatrix ring1_coupler(const FdmGeometry& geom, double omega);

struct InterferometricResponse {
    cplx buildup;          // s_1- / s_g
    double bus_coupling;   // |C12|^2
};

InterferometricResponse intracavity_buildup_interferometric(const FdmGeometry& geom, double omega);

struct ModeLayout {
    int n_lo = 0;
    int n_hi = 0;
    static constexpr int pump = 0;
    static constexpr int output = 1;
    std::vector<int> n;
    std::vector<int> signal;
    std::vector<int> idler;
    std::vector<int> ring2_split;         // j = -1 + 4m inside the occupied span
    std::vector<int> suppressed_targets;  // j = -5 + 12n and j = -1
    bool symmetric = false;               // |w_s,n - w_out| = |w_out - w_s,1-n| for every n
    bool targets_split = false;           // every suppressed target is a ring-2 split mode

    static int signal_index(int n) { return -2 + 6 * n; }
    static int idler_index(int n) { return 2 - 6 * n; }
    static bool is_ring2_split(int j) { return ((j + 1) % 4 + 4) % 4 == 0; }
};

ModeLayout plan_mode_layout(int n_modes);

struct PhaseCurves {
    std::vector<double> omega;
    std::vector<double> coupler;  // arg(Cbar11 e^{i Phi1})
    std::vector<double> ring2;    // arg(tbar12)
    std::vector<double> total;    // sum wrapped to (-pi, pi]
};

PhaseCurves round_trip_phase_diagnostic(const FdmGeometry& geom, std::span<const double> omega_grid, double V_heat = 0.0);
// Upward zero crossings of the wrapped total phase (wrap jumps excluded), linearly interpolated.
std::vector<double> phase_resonances(const PhaseCurves& curves);

// Nearest index to n_guess that puts a resonance of both rings at omega (needs L1/L2 integer).
double align_index(double n_guess, double omega, double L1, double L2);

struct RateDesign {
    double L1 = 0.0;
    double L2 = 0.0;
    double n_g = 0.0;
    double n_eff_guess = 0.0;
    double omega = 0.0;   // shared resonance of both rings
    double gamma1 = 0.0;  // ring 1 to bus
    double gamma2 = 0.0;  // ring 1 to ring 2, expressed through ring 2's round trip
    double gamma_L = 0.0; // intrinsic loss of both rings
};

FdmGeometry geometry_from_rates(const RateDesign& d);

// |t|^2 T_cpl^2 on a (voltage, wavelength) grid.
MeasuredMap transmission_map(const FdmGeometry& geom, std::span<const double> wavelength_nm,
                             std::span<const double> voltage, double T_cpl);

// Non-empty when the span exceeds 10 FSRs of ring 1 (linear dispersion no longer trustworthy).
std::optional<std::string> span_warning(const FdmGeometry& geom, double omega_min, double omega_max);

} // namespace ringfc::fdm
