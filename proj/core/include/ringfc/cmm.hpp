#pragma once

#include "ringfc/params.hpp"

#include <complex>
#include <span>
#include <vector>

namespace ringfc {

using cplx = std::complex<double>;

struct Extinction {
    cplx value{1.0, 0.0};
    bool infinite = false;  // gamma_L2 = 0 and Delta_ab = Omega

    double power() const;     // |zeta|^2, +inf when infinite
    double power_db() const;  // 10 log10 |zeta|^2
};

enum class SignalModel {
    depleted,    // full back-action of the converted modes on the signal
    undepleted,  // drops the 4 chi^2 term, used for fitting
};

struct Conversion {
    double eta_i_plus = 0.0;
    double eta_i_minus = 0.0;
    Extinction zeta;
    cplx t_s{1.0, 0.0};  // signal through amplitude under conversion (no T_cpl)
};

struct CwResponse {
    double omega_offset = 0.0;
    cplx t_s, t_i_plus, t_i_minus;
    double eta_i_plus = 0.0;
    double eta_i_minus = 0.0;
    Extinction zeta;
};

struct MaxConversion {
    double eta_max;
    double chi_max;
};

Extinction extinction_ratio(const CmmParams& p, double omega);
Conversion conversion_efficiency(const CmmParams& p, double omega, SignalModel model = SignalModel::depleted);

// Linear (pumps-off form) amplitude transmissions including the two T_cpl couplers.
cplx single_mode_through(double gamma, double total, double omega);
cplx coupled_mode_through(const CmmParams& p, double omega);

std::vector<CwResponse> transmission_spectra(const CmmParams& p, double T_cpl, std::span<const double> omega_grid);

// Maximum over chi_bar at Omega = Delta_ab = 0.
MaxConversion max_conversion(const CmmParams& p);

} // namespace ringfc
