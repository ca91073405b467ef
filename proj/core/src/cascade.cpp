#include "ringfc/cascade.hpp"

#include "ringfc/errors.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <limits>

namespace ringfc::cascade {

void CascadeParams::validate() const
{
    base.validate();
    if (!(Gamma_i() > 0.0) || !(Gamma_s() > 0.0)) throw DomainError("Gamma_i and Gamma_s must be positive");
}

Extinction cascade_extinction(const CascadeParams& p, double chi)
{
    p.validate();
    const double G = p.G();
    if (std::isinf(G)) return {cplx{std::numeric_limits<double>::infinity(), 0.0}, true};
    const double Gi = p.Gamma_i();
    return {cplx{Gi * Gi * (4.0 * G * G + 1.0) / (Gi * Gi + 4.0 * chi * chi), 0.0}, false};
}

double cascade_up_conversion(const CascadeParams& p, double chi)
{
    const Extinction z = cascade_extinction(p, chi);
    const double Gi = p.Gamma_i();
    const double Gs = p.Gamma_s();
    const double inv_zeta = z.infinite ? 0.0 : 1.0 / z.value.real();
    const double num = 4.0 * std::sqrt(p.base.coupling_i_plus() * p.base.coupling_s()) * chi;
    const double den = Gi * Gs + 4.0 * chi * chi * (1.0 + Gs / Gi + inv_zeta);
    return (num / den) * (num / den);
}

MaxConversion cascade_max_efficiency(const CascadeParams& p, bool large_extinction)
{
    p.validate();
    const double Gi = p.Gamma_i();
    const double Gs = p.Gamma_s();
    if (large_extinction) {
        const double eta = p.base.coupling_i_plus() * p.base.coupling_s() / (Gs * (Gi + Gs));
        return {eta, 0.5 * Gi * std::sqrt(Gs / (Gi + Gs))};
    }
    const double scale = std::sqrt(Gi * Gs);
    auto neg = [&](double x) { return -cascade_up_conversion(p, x * scale); };
    const auto r = boost::math::tools::brent_find_minima(neg, 1e-6, 10.0, std::numeric_limits<double>::digits / 2);
    return {-r.second, r.first * scale};
}

CascadeReport cascade_report(const CascadeParams& p)
{
    const MaxConversion m = cascade_max_efficiency(p, true);
    // chi_bar = 0 in the input means: report at the optimum
    const double chi = p.base.chi_bar > 0.0 ? p.base.chi_bar : m.chi_max;
    const Extinction z = cascade_extinction(p, chi);
    return {p.G(), chi, z.power_db(), m.eta_max};
}

} // namespace ringfc::cascade
