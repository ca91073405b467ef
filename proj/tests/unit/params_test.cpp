#include "oracles.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/params.hpp"
#include "ringfc/units.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <doctest.h>

#include <cmath>
#include <string>

using namespace ringfc;
using doctest::Approx;

namespace {

FdmGeometry rings(double nu2)
{
    FdmGeometry g;
    g.L1 = 324e-6;
    g.L2 = 81e-6;
    g.n_g = 4.73;
    g.n_eff_re = 2.618;
    g.omega_ref = omega_from_wavelength(1550e-9);
    g.nu2 = nu2;
    return g;
}

PumpConfig device_pump()
{
    PumpConfig p;
    p.P_p1 = dbm_to_watts(3.9);
    p.P_p2 = dbm_to_watts(4.2);
    p.V_ring = default_mode_volume(324e-6);
    return p;
}

std::string message_of(const CmmParams& p)
{
    try {
        p.validate();
    } catch (const DomainError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("lossless coupler has zero rate")
{
    CHECK(gamma_from_nu(1.0, 324e-6, 4.73) == 0.0);
    CHECK(gamma_from_nu(1.0, 81e-6, 3.0) == 0.0);
}

TEST_CASE("gamma and nu invert each other")
{
    for (double nu = 0.501; nu < 1.0; nu += 0.0173) {
        const double g = gamma_from_nu(nu, 324e-6, 4.73);
        CHECK(nu_from_gamma(g, 324e-6, 4.73) == Approx(nu).epsilon(1e-12));
    }
    const double g = gamma_from_nu(0.99, 324e-6, 4.73);
    CHECK(std::abs(nu_from_gamma(g, 324e-6, 4.73) - 0.99) < 1e-12);
}

TEST_CASE("nu for 27.4e9 rad/s against 50-digit arithmetic")
{
    using big = boost::multiprecision::cpp_bin_float_50;
    const big gamma("27.4e9"), ng("4.73"), L("324e-6"), c("299792458");
    const big ref = boost::multiprecision::exp(-gamma * ng * L / (2 * c));
    const double nu = nu_from_gamma(27.4e9, 324e-6, 4.73);
    CHECK(std::abs(nu - ref.convert_to<double>()) < 1e-15);
    CHECK(nu == Approx(0.932363).epsilon(1e-6));
}

TEST_CASE("coupler inputs outside the domain are rejected")
{
    CHECK_THROWS_AS(gamma_from_nu(0.0, 324e-6, 4.73), DomainError);
    CHECK_THROWS_AS(gamma_from_nu(1.01, 324e-6, 4.73), DomainError);
    CHECK_THROWS_AS(gamma_from_nu(0.9, 0.0, 4.73), DomainError);
    CHECK_THROWS_AS(gamma_from_nu(0.9, -1e-6, 4.73), DomainError);
    CHECK_THROWS_AS(nu_from_gamma(-1.0, 324e-6, 4.73), DomainError);
}

TEST_CASE("ring coupling falls as nu2 rises")
{
    double prev = INFINITY;
    for (double nu2 = 0.30; nu2 < 0.995; nu2 += 0.015) {
        const double g = g_from_geometry(rings(nu2), 28e9);
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("decoupled rings leave g = gamma_i / 4")
{
    const Splitting s = ring_splitting(rings(1.0), 28e9);
    CHECK(s.delta_omega == 0.0);
    CHECK(s.g == Approx(7e9));
    // close to 1 the splitting shrinks toward zero
    const double a = ring_splitting(rings(0.999), 28e9).delta_omega;
    const double b = ring_splitting(rings(0.99999), 28e9).delta_omega;
    CHECK(b < a);
    CHECK(b < 2e-3 * rings(0.5).fsr1());
}

TEST_CASE("bisection root agrees with a dense phase scan")
{
    for (double nu2 : {0.35, 0.6, 0.8, 0.95}) {
        const FdmGeometry g = rings(nu2);
        const double scan = oracle::splitting_by_scan(g, 100000);
        CHECK(std::abs(ring_splitting(g, 0.0).delta_omega - scan) < 1e-10 * g.fsr1());
    }
}

TEST_CASE("splitting needs a partially transmitting ring-2 coupler")
{
    CHECK_THROWS_AS(ring_splitting(rings(0.0), 28e9), DomainError);
    CHECK_THROWS_AS(ring_splitting(rings(1.5), 28e9), DomainError);
    CHECK_THROWS_AS(nu2_for_coupling(rings(0.5), 5e9, 28e9), DomainError);  // below gamma_i / 4
}

TEST_CASE("split design splits by 0.1 FSR")
{
    const auto d = oracle::split_design();
    FdmGeometry g = rings(nu_from_gamma(d.gamma2, d.L2, d.n_g));
    const double F = g.fsr1();
    const Splitting s = ring_splitting(g, d.gamma1);
    CHECK(s.delta_omega / F == Approx(0.10).epsilon(0.10));
    CHECK(s.g / std::sqrt(d.gamma_L * (d.gamma2 + d.gamma_L)) == Approx(16.9).epsilon(0.01));
}

TEST_CASE("nu2_for_coupling inverts g_from_geometry")
{
    const FdmGeometry g = rings(0.5);
    for (double target : {40e9, 80e9, 120e9}) {
        FdmGeometry h = g;
        h.nu2 = nu2_for_coupling(g, target, 28e9);
        CHECK(g_from_geometry(h, 28e9) == Approx(target).epsilon(1e-9));
    }
}

TEST_CASE("heater detuning")
{
    CHECK(heater_detuning(-839e9, 49.9e9, 0.0) == -839e9);
    // near cancellation: compare on the scale of the terms
    CHECK(std::abs(heater_detuning(-839e9, 49.9e9, 4.1) - (-839e9 + 49.9e9 * 16.81)) < 4.0 * 1e-15 * 839e9);
    const double v = heater_zero_voltage(-839e9, 49.9e9);
    CHECK(v == Approx(4.10).epsilon(2e-3));
    CHECK(std::abs(heater_detuning(-839e9, 49.9e9, v)) < 1e-3);
    CHECK_THROWS_AS(heater_zero_voltage(839e9, 49.9e9), DomainError);
    CHECK_THROWS_AS(heater_zero_voltage(-839e9, 0.0), DomainError);
}

TEST_CASE("heater and thermal laws are quadratic in V")
{
    // equal steps in V^2 give a vanishing second difference
    const double A = -839e9, B = 49.9e9;
    for (double u : {1.0, 3.0, 11.0}) {
        const double h = 0.75;
        const double d2 = heater_detuning(A, B, std::sqrt(u + h)) - 2.0 * heater_detuning(A, B, std::sqrt(u))
                        + heater_detuning(A, B, std::sqrt(u - h));
        CHECK(std::abs(d2) < 1e-15 * std::abs(A) * 8);
        const double n2 = thermal_index(2.618, 1.96e-4, std::sqrt(u + h)) - 2.0 * thermal_index(2.618, 1.96e-4, std::sqrt(u))
                        + thermal_index(2.618, 1.96e-4, std::sqrt(u - h));
        CHECK(std::abs(n2) < 1e-14);
    }
}

TEST_CASE("thermal index")
{
    CHECK(thermal_index(2.618, 1.96e-4, 0.0) == 2.618);
    CHECK(thermal_index(2.618, 1.96e-4, 10.0) == Approx(2.618 + 0.0196).epsilon(1e-14));
    const double V = 3.3;
    const double d0 = thermal_index(2.618, 1.96e-4, V) - 2.618;
    CHECK(thermal_index(2.618, 1.96e-4, std::sqrt(2.0) * V) - 2.618 == Approx(2.0 * d0).epsilon(1e-9));
}

TEST_CASE("chi estimate vanishes without a pump")
{
    PumpConfig p = device_pump();
    p.P_p1 = 0.0;
    CHECK(chi_bar_estimate(p, oracle::device_rates(), omega_from_wavelength(1550e-9), 2.618) == 0.0);
}

TEST_CASE("chi estimate scaling")
{
    const CmmParams c = oracle::device_rates();
    const double w = omega_from_wavelength(1550e-9);
    const PumpConfig p = device_pump();
    const double x = chi_bar_estimate(p, c, w, 2.618);

    PumpConfig q = p;
    q.P_p1 *= 2.0;
    q.P_p2 *= 2.0;
    CHECK(chi_bar_estimate(q, c, w, 2.618) == Approx(2.0 * x).epsilon(1e-12));
    q = p;
    q.P_p1 *= 9.0;
    CHECK(chi_bar_estimate(q, c, w, 2.618) == Approx(3.0 * x).epsilon(1e-12));

    // gamma / Gamma_1^2: double gamma while holding Gamma_1 with the loss
    CmmParams d = c;
    d.gamma = 2.0 * c.gamma;
    d.gamma_L1 = c.gamma_L1 - c.gamma;
    d.gamma_FCA = c.gamma_FCA;
    if (d.gamma_L1 < 0.0) {
        d.gamma_FCA += d.gamma_L1;
        d.gamma_L1 = 0.0;
    }
    REQUIRE(d.total_i_plus() == Approx(c.total_i_plus()).epsilon(1e-14));
    CHECK(chi_bar_estimate(p, d, w, 2.618) == Approx(2.0 * x).epsilon(1e-12));

    CmmParams e = c;
    e.gamma_L1 += c.total_i_plus();  // Gamma_1 doubled
    CHECK(chi_bar_estimate(p, e, w, 2.618) == Approx(x / 4.0).epsilon(1e-12));
}

TEST_CASE("chi estimate needs a mode volume")
{
    PumpConfig p = device_pump();
    p.V_ring = 0.0;
    CHECK_THROWS_AS(chi_bar_estimate(p, oracle::device_rates(), omega_from_wavelength(1550e-9), 2.618), DomainError);
}

TEST_CASE("device pumps give roughly 1.68e9 rad/s")
{
    const double chi = chi_bar_estimate(device_pump(), oracle::device_rates(), omega_from_wavelength(1550e-9), 2.618);
    CHECK(chi == Approx(1.68e9).epsilon(0.20));
}

TEST_CASE("parameter validation names the field")
{
    CmmParams p = oracle::device_rates();
    CHECK(message_of(p).empty());
    p.gamma_L1 = -1.0;
    CHECK(message_of(p).find("gamma_L1") != std::string::npos);
    p = oracle::device_rates();
    p.g = -1.0;
    CHECK(message_of(p).find("g") != std::string::npos);
    p = CmmParams{};
    CHECK_THROWS_AS(p.validate(), DomainError);  // every Gamma zero

    FdmGeometry g = rings(0.9);
    CHECK_NOTHROW(g.validate());
    g.nu1 = 1.2;
    CHECK_THROWS_AS(g.validate(), DomainError);
    g = rings(0.9);
    g.n_eff_im = -1e-6;
    CHECK_THROWS_AS(g.validate(), DomainError);
    g = rings(0.9);
    g.L2 = 0.0;
    CHECK_THROWS_AS(g.validate(), DomainError);

    PumpConfig q = device_pump();
    CHECK_NOTHROW(q.validate());
    q.T_cpl = 0.0;
    CHECK_THROWS_AS(q.validate(), DomainError);
    q = device_pump();
    q.P_s = -1.0;
    CHECK_THROWS_AS(q.validate(), DomainError);
}

TEST_CASE("normalized coupling")
{
    const CmmParams p = oracle::device_rates();
    CHECK(normalized_coupling(p) == Approx(78.5e9 / std::sqrt(8.02e9 * 48.3e9)).epsilon(1e-14));
    CmmParams q = p;
    q.g = 0.0;
    CHECK(normalized_coupling(q) == 0.0);
    q = p;
    q.gamma_L2 = 0.0;
    CHECK(std::isinf(normalized_coupling(q)));
}

TEST_CASE("unit conversions")
{
    CHECK(omega_from_wavelength(1550e-9) == Approx(2.0 * kPi * kSpeedOfLight / 1550e-9).epsilon(1e-15));
    CHECK(wavelength_from_omega(omega_from_wavelength(1310e-9)) == Approx(1310e-9).epsilon(1e-15));
    CHECK(dbm_to_watts(0.0) == Approx(1e-3));
    CHECK(dbm_to_watts(30.0) == Approx(1.0));
    CHECK(watts_to_dbm(dbm_to_watts(-11.6)) == Approx(-11.6));
    CHECK(db_to_power_ratio(-10.0) == Approx(0.1));
    CHECK(power_ratio_to_db(100.0) == Approx(20.0));
    CHECK(db_to_amplitude(-20.0) == Approx(0.1));
}
