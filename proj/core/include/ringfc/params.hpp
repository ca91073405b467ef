#pragma once

#include <optional>

namespace ringfc {

// Rate-level description of the two-ring device. Everything in rad/s.
struct CmmParams {
    double gamma = 0.0;      // bus coupling, shared by all ring-1 modes unless overridden
    double gamma_L1 = 0.0;   // ring-1 intrinsic loss
    double gamma_L2 = 0.0;   // ring-2 intrinsic loss
    double gamma_FCA = 0.0;  // free-carrier absorption (ring 1 only)
    double g = 0.0;          // ring-ring coupling
    double delta_ab = 0.0;   // ring-2 detuning from the down-converted mode
    double delta_NL = 0.0;   // pump-induced shift
    double chi_bar = 0.0;    // BS-FWM coupling

    std::optional<double> gamma_s;
    std::optional<double> gamma_i_plus;
    std::optional<double> gamma_i_minus;
    std::optional<double> gamma_o;

    double coupling_s() const { return gamma_s.value_or(gamma); }
    double coupling_i_plus() const { return gamma_i_plus.value_or(gamma); }
    double coupling_i_minus() const { return gamma_i_minus.value_or(gamma); }
    double coupling_o() const { return gamma_o.value_or(gamma); }

    double loss_ring1() const { return gamma_L1 + gamma_FCA; }
    double total_s() const { return coupling_s() + loss_ring1(); }
    double total_i_plus() const { return coupling_i_plus() + loss_ring1(); }
    double total_i_minus() const { return coupling_i_minus() + loss_ring1(); }
    // Delta_ab
    double detuning() const { return delta_ab + delta_NL; }

    // Throws DomainError naming the offending field.
    void validate() const;
};

// Normalized ring-ring coupling G = g / sqrt(gamma_L2 * Gamma_{i-}).
// This is the normalization for which zeta(0) = 4G^2 + 1 at Delta_ab = 0.
double normalized_coupling(const CmmParams& p);

struct MziConfig {
    double nu = 1.0;
    double psi = 0.0;
    double psi_R = 0.0;
    // relative imbalance of the second coupler (0 = identical couplers)
    double asymmetry = 0.0;
    // arm length difference, only used to turn psi into a function of omega
    double delta_L = 0.0;
};

// Geometry-level description feeding the transfer matrices.
struct FdmGeometry {
    double L1 = 0.0;
    double L2 = 0.0;
    double nu1 = 1.0;
    double nu2 = 1.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double n_eff_re = 0.0;
    double n_eff_im = 0.0;
    double n_g = 0.0;
    double omega_ref = 0.0;
    double heater_A = 0.0;  // rad/s
    double heater_B = 0.0;  // rad/s/V^2
    double dnV = 0.0;       // 1/V^2, ring 1 only
    std::optional<MziConfig> mzi;

    double fsr1() const;  // rad/s
    double fsr2() const;
    void validate() const;
};

struct PumpConfig {
    double P_p1 = 0.0;  // W, bus power just before the ring
    double P_p2 = 0.0;
    double P_s = 0.0;
    double T_cpl = 1.0;
    double n2 = 4.5e-18;  // m^2/W
    double V_ring = 0.0;  // m^3

    void validate() const;
};

inline constexpr double kWaveguideWidth = 500e-9;
inline constexpr double kWaveguideHeight = 250e-9;
double default_mode_volume(double L1);

double gamma_from_nu(double nu, double L, double n_g);
double nu_from_gamma(double gamma, double L, double n_g);

struct Splitting {
    double delta_omega;  // half distance between the split resonances
    double g;
};

// Root of the p = 0 branch of the ring-ring phase condition on (0, FSR1/2).
Splitting ring_splitting(const FdmGeometry& geom, double gamma_i);
double g_from_geometry(const FdmGeometry& geom, double gamma_i);
// Inverse of g_from_geometry in nu2 (other fields of geom kept).
double nu2_for_coupling(const FdmGeometry& geom, double g, double gamma_i);

double chi_bar_estimate(const PumpConfig& pump, const CmmParams& cmm, double omega_ref, double n_eff_re);

double heater_detuning(double A, double B, double V);
double thermal_index(double n0, double dnV, double V);
// Voltage where A + B V^2 = 0; throws DomainError when there is none.
double heater_zero_voltage(double A, double B);

} // namespace ringfc
