#pragma once

#include "ringfc/cmm.hpp"
#include "ringfc/params.hpp"

namespace ringfc::cascade {

// Signal, i+, i++ and i- share the ring-1 totals of the base parameters.
struct CascadeParams {
    CmmParams base;

    double Gamma_i() const { return base.total_i_plus(); }
    double Gamma_s() const { return base.total_s(); }
    double G() const { return normalized_coupling(base); }
    void validate() const;
};

// Output ratio of up- to down-converted amplitude at delta_ab = Omega = 0.
Extinction cascade_extinction(const CascadeParams& p, double chi_bar);

// Up-conversion efficiency with the first cascaded mode i++ present.
double cascade_up_conversion(const CascadeParams& p, double chi_bar);

// large_extinction: closed form valid for zeta >> 1; otherwise a bounded scalar search.
MaxConversion cascade_max_efficiency(const CascadeParams& p, bool large_extinction = true);

struct CascadeReport {
    double G;
    double chi_bar;
    double zeta_db;
    double eta_max;
};

// chi_bar of the base parameters, or the optimum when it is zero.
CascadeReport cascade_report(const CascadeParams& p);

} // namespace ringfc::cascade
