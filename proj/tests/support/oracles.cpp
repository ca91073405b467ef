#include "oracles.hpp"

#include "ringfc/units.hpp"

#include <cmath>

namespace oracle {

using namespace ringfc;

namespace {
constexpr cplx I{0.0, 1.0};
}

CwState cw_steady_state(const CmmParams& p, double omega, bool undepleted)
{
    const double chi = p.chi_bar;
    Eigen::Matrix4cd M = Eigen::Matrix4cd::Zero();
    Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
    // rows: s, i+, i-, B; every row reads  M x + rhs = 0
    M(0, 0) = -(0.5 * p.total_s() - I * omega);
    if (!undepleted) {
        M(0, 1) = -I * chi;
        M(0, 2) = -I * chi;
    }
    rhs(0) = std::sqrt(p.coupling_s());
    M(1, 0) = -I * chi;
    M(1, 1) = -(0.5 * p.total_i_plus() - I * omega);
    M(2, 0) = -I * chi;
    M(2, 2) = -(0.5 * p.total_i_minus() - I * omega);
    M(2, 3) = -I * p.g;
    M(3, 2) = -I * p.g;
    M(3, 3) = -(0.5 * p.gamma_L2 - I * (omega - p.detuning()));
    const Eigen::Vector4cd x = M.fullPivLu().solve(-rhs);

    CwState s;
    s.A_s = x(0);
    s.A_p = x(1);
    s.A_m = x(2);
    s.B = x(3);
    s.eta_plus = p.coupling_i_plus() * std::norm(s.A_p);
    s.eta_minus = p.coupling_i_minus() * std::norm(s.A_m);
    s.t_s = 1.0 - std::sqrt(p.coupling_s()) * s.A_s;
    return s;
}

long double eta_plus_extended(const CmmParams& p, long double chi)
{
    using lc = std::complex<long double>;
    const lc J{0.0L, 1.0L};
    Eigen::Matrix<lc, 4, 4> M = Eigen::Matrix<lc, 4, 4>::Zero();
    Eigen::Matrix<lc, 4, 1> rhs = Eigen::Matrix<lc, 4, 1>::Zero();
    M(0, 0) = -0.5L * p.total_s();
    M(0, 1) = -J * chi;
    M(0, 2) = -J * chi;
    rhs(0) = std::sqrt(static_cast<long double>(p.coupling_s()));
    M(1, 0) = -J * chi;
    M(1, 1) = -0.5L * p.total_i_plus();
    M(2, 0) = -J * chi;
    M(2, 2) = -0.5L * p.total_i_minus();
    M(2, 3) = -J * static_cast<long double>(p.g);
    M(3, 2) = -J * static_cast<long double>(p.g);
    M(3, 3) = -(0.5L * p.gamma_L2 + J * static_cast<long double>(p.detuning()));
    const Eigen::Matrix<lc, 4, 1> x = M.fullPivLu().solve(-rhs);
    return p.coupling_i_plus() * std::norm(x(1));
}

CascadeState cascade_steady_state(const CmmParams& p, double chi)
{
    Eigen::Matrix<cplx, 5, 5> M = Eigen::Matrix<cplx, 5, 5>::Zero();
    Eigen::Matrix<cplx, 5, 1> rhs = Eigen::Matrix<cplx, 5, 1>::Zero();
    // s, i+, i++, i-, B
    const double Gs = p.total_s(), Gp = p.total_i_plus(), Gm = p.total_i_minus();
    M(0, 0) = -0.5 * Gs;
    M(0, 1) = -I * chi;
    M(0, 3) = -I * chi;
    rhs(0) = std::sqrt(p.coupling_s());
    M(1, 0) = -I * chi;
    M(1, 1) = -0.5 * Gp;
    M(1, 2) = -I * chi;
    M(2, 1) = -I * chi;
    M(2, 2) = -0.5 * Gp;
    M(3, 0) = -I * chi;
    M(3, 3) = -0.5 * Gm;
    M(3, 4) = -I * p.g;
    M(4, 3) = -I * p.g;
    M(4, 4) = -0.5 * p.gamma_L2;
    const Eigen::Matrix<cplx, 5, 1> x = M.fullPivLu().solve(-rhs);

    CascadeState s;
    s.A_s = x(0);
    s.A_p = x(1);
    s.A_pp = x(2);
    s.A_m = x(3);
    s.B = x(4);
    const double gp = p.coupling_i_plus();
    s.eta_plus = gp * std::norm(s.A_p);
    s.out_flux = std::norm(1.0 - std::sqrt(p.coupling_s()) * s.A_s) + gp * std::norm(s.A_p) + gp * std::norm(s.A_pp)
               + p.coupling_i_minus() * std::norm(s.A_m);
    s.ratio = s.A_p / s.A_m;
    return s;
}

Peak maximize(const std::function<double(double)>& f, double lo, double hi, double xtol)
{
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > xtol * (std::abs(a) + std::abs(b) + 1e-300)) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    return {x, f(x)};
}

PeakL maximize(const std::function<long double(long double)>& f, long double lo, long double hi, long double xtol)
{
    const long double r = 0.5L * (std::sqrt(5.0L) - 1.0L);
    long double a = lo, b = hi;
    long double c = b - r * (b - a), d = a + r * (b - a);
    long double fc = f(c), fd = f(d);
    while (b - a > xtol * (std::abs(a) + std::abs(b))) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    const long double x = 0.5L * (a + b);
    return {x, f(x)};
}

double splitting_by_scan(const FdmGeometry& g, int samples)
{
    const double t1 = g.n_g * g.L1 / kSpeedOfLight;
    const double t2 = g.n_g * g.L2 / kSpeedOfLight;
    const double nu = g.nu2;
    const double F = g.fsr1();
    // unwrapped phase of the ring-1 round trip, starting just above the aligned resonance
    auto scan = [&](double lo, double hi, double phase_lo, double& x_out) {
        double prev_x = lo, prev_h = t1 * lo + phase_lo, prev_arg = phase_lo;
        for (int k = 1; k <= samples; ++k) {
            const double x = lo + (hi - lo) * k / samples;
            const cplx e = std::exp(I * (t2 * x));
            double a = std::arg((nu - e) / (1.0 - nu * e));
            while (a - prev_arg > kPi) a -= 2.0 * kPi;
            while (a - prev_arg < -kPi) a += 2.0 * kPi;
            const double h = t1 * x + a;
            if (prev_h < 0.0 && h >= 0.0) {
                x_out = prev_x + (x - prev_x) * (-prev_h) / (h - prev_h);
                return std::pair{prev_x, prev_arg};
            }
            prev_x = x;
            prev_h = h;
            prev_arg = a;
        }
        return std::pair{-1.0, 0.0};
    };
    const double x0 = 1e-9 * F;
    const cplx e0 = std::exp(I * (t2 * x0));
    double a0 = std::arg((nu - e0) / (1.0 - nu * e0));
    if (a0 > 0.0) a0 -= 2.0 * kPi;
    double coarse = 0.0;
    const auto [blo, barg] = scan(x0, 0.5 * F, a0, coarse);
    if (blo < 0.0) return NAN;
    double fine = coarse;
    scan(blo, blo + 0.5 * F / samples, barg, fine);
    return fine;
}

double purity_density_matrix(const Eigen::MatrixXcd& A, double ds, double di)
{
    const double n = A.squaredNorm() * ds * di;
    const Eigen::Index ns = A.rows();
    double tr = 0.0;
    for (Eigen::Index a = 0; a < ns; ++a)
        for (Eigen::Index b = 0; b < ns; ++b) {
            cplx rho = 0.0;
            for (Eigen::Index k = 0; k < A.cols(); ++k) rho += A(a, k) * std::conj(A(b, k));
            rho *= di / n;
            tr += std::norm(rho) * ds * ds;
        }
    return tr;
}

Eigen::MatrixXcd flat_pump_jsa(double Gs, double Gi, double Gp, const std::vector<double>& ws, const std::vector<double>& wi)
{
    Eigen::MatrixXcd A(static_cast<Eigen::Index>(ws.size()), static_cast<Eigen::Index>(wi.size()));
    for (std::size_t a = 0; a < ws.size(); ++a)
        for (std::size_t b = 0; b < wi.size(); ++b) {
            const cplx Fp = 2.0 * kPi / (Gp + I * (ws[a] + wi[b]));
            A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))
                = Fp / ((0.5 * Gi + I * wi[b]) * (0.5 * Gs + I * ws[a]));
        }
    return A;
}

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = n == 1 ? a : a + (b - a) * k / (n - 1);
    return v;
}

CmmParams device_rates()
{
    CmmParams p;
    p.gamma = 27.4e9;
    p.gamma_L1 = 10.9e9;
    p.gamma_L2 = 8.02e9;
    p.g = 78.5e9;
    p.gamma_FCA = 10.0e9;
    p.chi_bar = 1.09e9;
    return p;
}

fit::CmmMapModel linear_truth()
{
    fit::CmmMapModel t;
    t.rates.gamma = 27.4e9;
    t.rates.gamma_L1 = 10.9e9;
    t.rates.gamma_L2 = 8.02e9;
    t.rates.g = 78.5e9;
    t.A = -839e9;
    t.B = 49.9e9;
    t.omega_b = omega_from_wavelength(1550e-9);
    const double F = 2.0 * kPi * kSpeedOfLight / (4.73 * 324e-6);
    t.offset_s = F;
    t.offset_ip = 2.0 * F;
    t.T_cpl = 0.8;
    return t;
}

std::vector<double> map_wavelengths(const fit::CmmMapModel& t, int n)
{
    const double lo = t.omega_b - 0.65e12, hi = t.omega_b + t.offset_ip + 0.6e12;
    std::vector<double> lam;
    for (int k = 0; k < n; ++k) lam.push_back(wavelength_from_omega(hi - (hi - lo) * k / (n - 1)) * 1e9);
    return lam;
}

std::vector<double> map_voltages()
{
    std::vector<double> v;
    for (int k = 0; k <= 14; ++k) v.push_back(3.4 + 0.1 * k);
    return v;
}

std::vector<double> pump_shifts() { return {-21.6097e9, 0.8130e9, 4.8078e9, 4.1497e9, 11.8393e9}; }

FdmGeometry fdm_truth(bool lossy)
{
    FdmGeometry g;
    g.L1 = 324e-6;
    g.L2 = 81e-6;
    g.n_g = 4.73;
    g.omega_ref = omega_from_wavelength(1550e-9);
    g.dnV = 1.96e-4;
    g.n_eff_re = 2.618;
    // both rings resonant at omega_ref near 4.1 V
    g.theta2 = std::remainder(-g.n_eff_re * g.omega_ref * g.L2 / kSpeedOfLight, 2.0 * kPi);
    g.theta1 = std::remainder(-(g.n_eff_re + g.dnV * 4.1 * 4.1) * g.omega_ref * g.L1 / kSpeedOfLight - g.theta2, 2.0 * kPi);
    g.nu1 = nu_from_gamma(28e9, g.L1, g.n_g);
    g.n_eff_im = lossy ? 12e9 * g.n_g / (2.0 * g.omega_ref) : 0.0;
    g.nu2 = nu2_for_coupling(g, 80e9, 28e9);
    return g;
}

std::vector<double> fdm_wavelengths(const FdmGeometry& g, int n)
{
    const double lo = g.omega_ref - 0.65e12, hi = g.omega_ref + 2.0 * g.fsr1() + 0.6e12;
    std::vector<double> lam;
    for (int k = 0; k < n; ++k) lam.push_back(wavelength_from_omega(hi - (hi - lo) * k / (n - 1)) * 1e9);
    return lam;
}

fit::FdmFitOptions fdm_options(const FdmGeometry& g)
{
    fit::FdmFitOptions o;
    o.initial.L1 = g.L1;
    o.initial.L2 = g.L2;
    o.initial.omega_ref = g.omega_ref;
    o.initial.n_eff_re = 2.618;
    o.initial.n_g = 4.7;
    o.initial.theta1 = g.theta1;
    o.initial.theta2 = g.theta2;
    o.initial.nu1 = 0.99;
    o.initial.nu2 = 0.9;
    return o;
}

fdm::RateDesign split_design()
{
    fdm::RateDesign d;
    d.L1 = 324e-6;
    d.L2 = 81e-6;
    d.n_g = 4.73;
    d.n_eff_guess = 2.618;
    d.omega = omega_from_wavelength(1550e-9);
    const double F = 2.0 * kPi * kSpeedOfLight / (d.n_g * d.L1);
    d.gamma1 = 0.011 * F;
    d.gamma2 = 0.067 * F;
    d.gamma_L = 5.3e-4 * F;
    return d;
}

} // namespace oracle
