#include "ringfc/cmm.hpp"

#include <cmath>
#include <limits>

namespace ringfc {

namespace {
constexpr cplx I{0.0, 1.0};
}

double Extinction::power() const
{
    return infinite ? std::numeric_limits<double>::infinity() : std::norm(value);
}

double Extinction::power_db() const
{
    return infinite ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(std::norm(value));
}

Extinction extinction_ratio(const CmmParams& p, double omega)
{
    if (p.g == 0.0) return {};
    const cplx ring2 = p.gamma_L2 + 2.0 * I * (p.detuning() - omega);
    if (ring2 == 0.0) return {cplx{std::numeric_limits<double>::infinity(), 0.0}, true};
    const cplx ring1 = p.total_i_minus() - 2.0 * I * omega;
    return {4.0 * p.g * p.g / (ring2 * ring1) + 1.0, false};
}

Conversion conversion_efficiency(const CmmParams& p, double omega, SignalModel model)
{
    p.validate();
    Conversion out;
    out.zeta = extinction_ratio(p, omega);
    const double gs = p.coupling_s();
    const double gp = p.coupling_i_plus();
    const double gm = p.coupling_i_minus();
    const cplx Ls = p.total_s() - 2.0 * I * omega;
    const cplx Lp = p.total_i_plus() - 2.0 * I * omega;
    const cplx Lm = p.total_i_minus() - 2.0 * I * omega;
    const double chi = p.chi_bar;

    // (Gamma_s - 2i Omega) A_s + back-action = 2 sqrt(gamma_s) S_in
    cplx D = Ls;
    if (model == SignalModel::depleted) {
        D += 4.0 * chi * chi / Lp;
        if (!out.zeta.infinite) D += 4.0 * chi * chi / (Lm * out.zeta.value);
    }
    const cplx As = 2.0 * std::sqrt(gs) / D;  // per unit input amplitude
    const cplx Ap = -2.0 * I * chi * As / Lp;
    out.eta_i_plus = gp * std::norm(Ap);
    if (out.zeta.infinite) {
        out.eta_i_minus = 0.0;
    } else {
        const cplx Am = -2.0 * I * chi * As / (Lm * out.zeta.value);
        out.eta_i_minus = gm * std::norm(Am);
    }
    out.t_s = 1.0 - std::sqrt(gs) * As;
    return out;
}

cplx single_mode_through(double gamma, double total, double omega)
{
    return 1.0 - gamma / (0.5 * total - I * omega);
}

cplx coupled_mode_through(const CmmParams& p, double omega)
{
    cplx denom = 0.5 * p.total_i_minus() - I * omega;
    if (p.g != 0.0) {
        const cplx ring2 = 0.5 * p.gamma_L2 - I * (omega - p.detuning());
        if (ring2 == 0.0) return 1.0;  // ring 2 pole absorbs the whole self-energy
        denom += p.g * p.g / ring2;
    }
    return 1.0 - p.coupling_i_minus() / denom;
}

std::vector<CwResponse> transmission_spectra(const CmmParams& p, double T_cpl, std::span<const double> omega_grid)
{
    p.validate();
    std::vector<CwResponse> out;
    out.reserve(omega_grid.size());
    for (double w : omega_grid) {
        CwResponse r;
        r.omega_offset = w;
        r.t_s = T_cpl * single_mode_through(p.coupling_s(), p.total_s(), w);
        r.t_i_plus = T_cpl * single_mode_through(p.coupling_i_plus(), p.total_i_plus(), w);
        r.t_i_minus = T_cpl * coupled_mode_through(p, w);
        const Conversion c = conversion_efficiency(p, w);
        r.eta_i_plus = c.eta_i_plus;
        r.eta_i_minus = c.eta_i_minus;
        r.zeta = c.zeta;
        out.push_back(r);
    }
    return out;
}

MaxConversion max_conversion(const CmmParams& p)
{
    p.validate();
    CmmParams q = p;
    q.delta_ab = 0.0;
    q.delta_NL = 0.0;
    const Extinction z = extinction_ratio(q, 0.0);
    const double Gp = q.total_i_plus();
    const double Gs = q.total_s();
    const double Gm = q.total_i_minus();
    // at Omega = 0 zeta is real: k = 1 + Gamma_{i+}/(Gamma_{i-} zeta), which is (2+4G^2)/(1+4G^2)
    // when both idler modes share their rates
    const double k = z.infinite ? 1.0 : 1.0 + Gp / (Gm * z.value.real());
    return {q.coupling_i_plus() * q.coupling_s() / (k * Gp * Gs), 0.5 * std::sqrt(Gp * Gs / k)};
}

} // namespace ringfc
