#include "oracles.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/shaping.hpp"

#include <doctest.h>

#include <cmath>

using namespace ringfc;
using namespace ringfc::shaping;
using doctest::Approx;

namespace {

const double kLn2 = std::log(2.0);

// trapezoid on a fine uniform grid
template <class F>
double integrate(F f, double a, double b, int n = 200000)
{
    const double h = (b - a) / n;
    double s = 0.5 * (f(a) + f(b));
    for (int k = 1; k < n; ++k) s += f(a + k * h);
    return s * h;
}

TargetWavepacket narrow(double go, double ratio)
{
    const double dt = 4.0 * kLn2 / (ratio * go);
    return TargetWavepacket::gaussian(dt, 3.83 * dt);
}

CmmParams two_mode(double go, double gl)
{
    CmmParams p;
    p.gamma = go;
    p.gamma_L1 = gl;
    p.gamma_L2 = gl;
    return p;
}

} // namespace

TEST_CASE("gaussian target has unit norm")
{
    for (double dt : {1e-10, 3e-9, 2.5}) {
        const auto w = TargetWavepacket::gaussian(dt, 2.0 * dt);
        const double n = integrate([&](double t) { return w.value(t) * w.value(t); }, w.t0() - 10 * dt, w.t0() + 10 * dt);
        CHECK(n == Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gaussian target matches the explicit form and its FWHM")
{
    const double dt = 2e-10, t0 = 7e-10;
    const auto w = TargetWavepacket::gaussian(dt, t0);
    for (double t : {0.0, 3e-10, 7e-10, 9.1e-10}) {
        const double ref = std::sqrt(2.0 / dt) * std::pow(kLn2 / M_PI, 0.25) * std::exp(-2.0 * kLn2 * std::pow((t - t0) / dt, 2));
        CHECK(w.value(t) == Approx(ref).epsilon(1e-13));
    }
    const double peak = std::pow(w.value(t0), 2);
    CHECK(std::pow(w.value(t0 + 0.5 * dt), 2) == Approx(0.5 * peak).epsilon(1e-12));
    CHECK(w.bandwidth() == Approx(4.0 * kLn2 / dt));
    const double h = 1e-16;
    CHECK(w.derivative(8e-10) == Approx((w.value(8e-10 + h) - w.value(8e-10 - h)) / (2 * h)).epsilon(1e-5));
}

TEST_CASE("sampled target renormalizes")
{
    std::vector<double> t, s;
    for (int k = 0; k <= 2000; ++k) {
        t.push_back(k * 1e-3);
        s.push_back(3.0 * std::exp(-std::pow((t.back() - 1.0) / 0.2, 2)));
    }
    const auto w = TargetWavepacket::sampled(t, s);
    const double n = integrate([&](double x) { return w.value(x) * w.value(x); }, 0.0, 2.0, 20000);
    CHECK(n == Approx(1.0).epsilon(1e-4));
    CHECK(w.value(-1.0) == 0.0);
    CHECK(w.value(3.0) == 0.0);
}

TEST_CASE("envelope shape")
{
    const double te = 0.4;
    CHECK(envelope_side(0.0, te) == Approx(0.5));
    CHECK(envelope_side(-0.21, te) == 0.0);
    CHECK(envelope_side(0.21, te) == 1.0);
    CHECK(envelope_side(0.1, te) == Approx(0.5 * (1.0 + std::sin(M_PI * 0.25))));
    CHECK(envelope(3.0, 1.0, 5.0, te) == 1.0);
    CHECK(envelope(0.5, 1.0, 5.0, te) == 0.0);
    CHECK(envelope(5.5, 1.0, 5.0, te) == 0.0);
    CHECK(envelope(1.0, 1.0, 5.0, te) == Approx(0.5));
    CHECK(envelope(5.0, 1.0, 5.0, te) == Approx(0.5));
    // a hard edge
    CHECK(envelope_side(-1e-9, 0.0) == 0.0);
    CHECK(envelope_side(1e-9, 0.0) == 1.0);
    // monotone ramp
    double prev = -1.0;
    for (double x = -0.3; x <= 0.3; x += 0.01) {
        const double v = envelope_side(x, te);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("critical time is the first zero of the emission drive")
{
    oracle::Draw d(31);
    for (int k = 0; k < 20; ++k) {
        const double go = d(1e9, 5e10);
        const double gl = d(0.0, 0.5) * go;
        const auto w = narrow(go, d(0.05, 2.0));
        auto q = [&](double t) { return 0.5 * (go - gl) * w.value(t) + w.derivative(t); };
        double a = w.t0(), b = w.t0() + 20 * w.fwhm();
        REQUIRE(q(a) > 0.0);
        REQUIRE(q(b) < 0.0);
        for (int i = 0; i < 200; ++i) {
            const double m = 0.5 * (a + b);
            (q(m) > 0.0 ? a : b) = m;
        }
        CHECK(critical_time(w, go, gl) == Approx(0.5 * (a + b)).epsilon(1e-9));
    }
}

TEST_CASE("critical time of a sampled target agrees with the gaussian")
{
    const double go = 1e10;
    const auto g = narrow(go, 0.4);
    std::vector<double> t, s;
    for (int k = 0; k <= 8000; ++k) {
        t.push_back(g.support_begin() + k * (g.support_end() - g.support_begin()) / 8000);
        s.push_back(g.value(t.back()));
    }
    const auto w = TargetWavepacket::sampled(t, s);
    CHECK(critical_time(w, go, 1e8) == Approx(critical_time(g, go, 1e8)).epsilon(1e-4));
}

TEST_CASE("critical time moves later for narrower bandwidth")
{
    const double go = 1e10;
    double prev = -1.0;
    for (double r : {2.0, 1.0, 0.5, 0.2, 0.1}) {
        const auto w = narrow(go, r);
        const double lag = (critical_time(w, go, 0.0) - w.t0()) / w.fwhm();
        CHECK(lag > prev);
        prev = lag;
    }
    CHECK_THROWS_AS(critical_time(narrow(go, 0.4), go, 2 * go), DomainError);
}

TEST_CASE("window past the critical time is rejected")
{
    const double go = 1e10;
    const auto w = narrow(go, 0.4);
    const double tc = critical_time(w, go, 1e8);
    SynthesisOptions o;
    o.window_end = tc + 0.1 * w.fwhm();
    try {
        synthesize_control(w, go, 1e8, o);
        FAIL("expected PositivityViolation");
    } catch (const PositivityViolation& e) {
        CHECK(e.critical_time() == Approx(tc));
    }
    o.window_end = tc - 0.1 * w.fwhm();
    CHECK_NOTHROW(synthesize_control(w, go, 1e8, o));
}

TEST_CASE("synthesized control is real, finite and non-negative")
{
    const double go = 1e10;
    const auto w = narrow(go, 0.38);
    const auto c = synthesize_control(w, go, go / 500);
    CHECK(c.validity_end() == Approx(critical_time(w, go, go / 500)));
    for (const cplx& v : c.samples()) {
        CHECK(std::isfinite(v.real()));
        CHECK(v.imag() == 0.0);
        CHECK(v.real() >= 0.0);
    }
    CHECK(c(c.validity_end() * 1.01) == cplx{});
    CHECK(c(-1.0) == cplx{});
}

TEST_CASE("no control: nothing is emitted and the signal decays at the intrinsic rate")
{
    const double go = 1e10, gl = 2e8;
    CmmParams p = two_mode(go, gl);
    p.g = 3e9;
    std::vector<double> t{0.0, 1e-10, 2e-10, 3e-10, 1e-8};
    const ControlPulse zero(t, std::vector<cplx>(t.size()), 0.0, 1e-8);
    EmissionOptions o;
    o.t_end = 1e-8;
    const auto e = integrate_emission(p, zero, o);
    CHECK(e.eta_out == 0.0);
    for (std::size_t k = 0; k < e.t.size(); k += 37) {
        CHECK(std::abs(e.S_out[k]) == 0.0);
        CHECK(e.occ_s[k] == Approx(std::exp(-gl * e.t[k])).epsilon(1e-8));
    }
}

TEST_CASE("lossless four-mode emission conserves flux")
{
    oracle::Draw d(7);
    const double go = 1e10;
    for (int k = 0; k < 5; ++k) {
        CmmParams p = two_mode(go, 0.0);
        p.g = d(0.1, 3.0) * go;
        p.delta_ab = d(-1.0, 1.0) * go;
        const auto w = narrow(go, d(0.2, 1.0));
        const auto c = apply_envelope(synthesize_control(w, go, 0.0), 0.4 * w.fwhm(), critical_time(w, go, 0.0),
                                      0.8 * w.fwhm(), d(0.8, 1.2));
        EmissionOptions o;
        o.rel_tol = 1e-11;
        o.abs_tol = 1e-14;
        const auto e = integrate_emission(p, c, o);
        CHECK(e.eta_out + e.eta_down + e.final_population() == Approx(1.0).epsilon(1e-8));
        CHECK(e.eta_down > 0.0);
    }
}

TEST_CASE("absorption of the target through the synthesized control is complete")
{
    const double go = 1e10;
    for (double r : {0.1, 0.38}) {
        const auto w = narrow(go, r);
        const auto c = synthesize_control(w, go, 0.0);
        const auto a = integrate_absorption(go, 0.0, c, w);
        CHECK(std::abs(1.0 - std::norm(a.A_s)) < 1e-3);
        CHECK(std::norm(a.A_o) < 1e-3);
        CHECK(a.reflected < 1e-3);
    }
}

TEST_CASE("lossy absorption keeps exactly the decayed fraction")
{
    // with intrinsic loss the synthesis still zeroes the reflection; the stored amplitude carries e^{-gamma_L t}
    const double go = 1e10, gl = 2e7;
    const auto w = narrow(go, 0.38);
    const auto c = synthesize_control(w, go, gl);
    const auto a = integrate_absorption(go, gl, c, w);
    CHECK(a.reflected < 1e-3);
    CHECK(std::norm(a.A_s) < 1.0);
    CHECK(std::norm(a.A_s) > 0.9);
}

TEST_CASE("emitted efficiency falls as intrinsic loss rises")
{
    double prev = 2.0;
    for (double ql : {4000.0, 2000.0, 1000.0, 500.0, 250.0}) {
        EmissionDesign d;
        d.ql_over_qo = ql;
        d.tau_off_over_dt = 5.91;
        d.beta = 1.06;
        const auto e = evaluate_design(d);
        CHECK(e.eta_out < prev);
        prev = e.eta_out;
    }
}

TEST_CASE("emission is translation invariant")
{
    const double go = 1e10;
    const CmmParams p = two_mode(go, 0.0);
    double eta[2], ol[2];
    for (int k = 0; k < 2; ++k) {
        const double dt = 4.0 * kLn2 / (0.4 * go);
        const double shift = k * 1.7 * dt;
        const auto w = TargetWavepacket::gaussian(dt, 3.83 * dt + shift);
        SynthesisOptions so;
        so.t_start = shift;
        const auto c = apply_envelope(synthesize_control(w, go, 0.0, so), shift + 0.4 * dt, critical_time(w, go, 0.0),
                                      0.8 * dt, 1.0);
        EmissionOptions o;
        o.target = &w;
        o.down_converted_mode = false;
        const auto e = integrate_emission(p, c, o);
        eta[k] = e.eta_out;
        ol[k] = e.overlap;
    }
    CHECK(eta[1] == Approx(eta[0]).epsilon(1e-6));
    CHECK(ol[1] == Approx(ol[0]).epsilon(1e-6));
}

TEST_CASE("efficiency and overlap stay in [0, 1]")
{
    oracle::Draw d(3);
    for (int k = 0; k < 8; ++k) {
        EmissionDesign ds;
        ds.G = d(5.0, 200.0);
        ds.ql_over_qo = d(50.0, 2000.0);
        ds.dw_over_gamma = d(0.1, 1.2);
        ds.tau_on_over_dt = d(0.1, 0.8);
        ds.beta = d(0.7, 1.4);
        const auto e = evaluate_design(ds);
        CHECK(e.eta_out >= 0.0);
        CHECK(e.eta_out <= 1.0);
        CHECK(e.overlap >= 0.0);
        CHECK(e.overlap <= 1.0 + 1e-9);
        CHECK(e.eta_out + e.eta_down <= 1.0 + 1e-9);
    }
}

TEST_CASE("halving the tolerances barely moves the result")
{
    EmissionDesign d;
    d.tau_off_over_dt = 5.91;
    d.beta = 1.06;
    EmissionOptions a;
    EmissionOptions b;
    b.rel_tol = 0.5 * a.rel_tol;
    b.abs_tol = 0.5 * a.abs_tol;
    const auto ea = evaluate_design(d, a);
    const auto eb = evaluate_design(d, b);
    CHECK(std::abs(ea.eta_out - eb.eta_out) < 1e-7);
    CHECK(std::abs(ea.overlap - eb.overlap) < 1e-7);
}

TEST_CASE("reference emission design reaches the overlap floor")
{
    EmissionDesign d;
    d.G = 100;
    d.ql_over_qo = 500;
    d.dw_over_gamma = 0.38;
    d.t0_over_dt = 3.83;
    d.tau_on_over_dt = 0.42;
    d.tau_off_over_dt = 5.91;
    d.beta = 1.06;
    const auto e = evaluate_design(d);
    CHECK(e.overlap >= 0.99);
    CHECK(e.eta_out > 0.9);
    CHECK(e.eta_out < 1.0);
}

TEST_CASE("sweep cell: a looser overlap floor buys efficiency")
{
    SweepOptions strict;
    SweepOptions loose;
    loose.ol_floor = 0.90;
    const auto a = optimize_cell(100, 1000, strict);
    const auto b = optimize_cell(100, 1000, loose);
    REQUIRE(a.best);
    REQUIRE(b.best);
    CHECK(a.best->overlap >= 0.99);
    CHECK(b.best->overlap >= 0.90);
    CHECK(b.best->eta_out > a.best->eta_out);
    CHECK(a.evaluations <= strict.max_evaluations);
}

TEST_CASE("sweep cell: weaker ring coupling wants a narrower photon")
{
    const auto hi = optimize_cell(100, 1000, SweepOptions{});
    const auto lo = optimize_cell(10, 1000, SweepOptions{});
    REQUIRE(hi.best);
    REQUIRE(lo.best);
    CHECK(lo.best->dw_over_gamma < hi.best->dw_over_gamma);
    CHECK(lo.best->eta_out < hi.best->eta_out);
}

TEST_CASE("sweep runs rows in parallel with the same result")
{
    const std::vector<double> G{30, 100};
    const std::vector<double> q{300, 1000};
    SweepOptions o;
    o.max_evaluations = 60;
    const auto s1 = sweep_figures_of_merit(G, q, o, 1);
    const auto s2 = sweep_figures_of_merit(G, q, o, 2);
    REQUIRE(s1.size() == 4);
    for (std::size_t k = 0; k < s1.size(); ++k) {
        CHECK(s1[k].G == s2[k].G);
        CHECK(s1[k].ql_over_qo == s2[k].ql_over_qo);
        CHECK(bool(s1[k].best) == bool(s2[k].best));
        if (s1[k].best) CHECK(s1[k].best->eta_out == s2[k].best->eta_out);
    }
}

TEST_CASE("invalid control grid")
{
    CHECK_THROWS_AS(ControlPulse({0.0, 1.0}, {0.0, 0.0}, 0.0, 1.0), DomainError);
    const auto w = narrow(1e10, 0.4);
    const auto c = synthesize_control(w, 1e10, 0.0);
    CHECK_THROWS_AS(apply_envelope(c, 2.0, 1.0, 0.1, 1.0), DomainError);
}
