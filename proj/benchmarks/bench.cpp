#include "ringfc/cmm.hpp"
#include "ringfc/fdm.hpp"
#include "ringfc/jsa.hpp"
#include "ringfc/params.hpp"
#include "ringfc/shaping.hpp"
#include "ringfc/units.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace ringfc;

namespace {

CmmParams rates()
{
    CmmParams p;
    p.gamma = 27.4e9;
    p.gamma_L1 = 10.9e9;
    p.gamma_L2 = 8.02e9;
    p.gamma_FCA = 10e9;
    p.g = 78.5e9;
    p.chi_bar = 1.09e9;
    return p;
}

void BM_conversion_spectrum(benchmark::State& st)
{
    const CmmParams p = rates();
    std::vector<double> grid(static_cast<std::size_t>(st.range(0)));
    for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = -100e9 + 200e9 * k / (grid.size() - 1);
    for (auto _ : st) {
        double acc = 0.0;
        for (double w : grid) acc += conversion_efficiency(p, w).eta_i_plus;
        benchmark::DoNotOptimize(acc);
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_conversion_spectrum)->Arg(801)->Arg(8001);

void BM_fdm_map(benchmark::State& st)
{
    fdm::RateDesign d;
    d.L1 = 324e-6;
    d.L2 = 81e-6;
    d.n_g = 4.73;
    d.n_eff_guess = 2.618;
    d.omega = omega_from_wavelength(1550e-9);
    d.gamma1 = 27.4e9;
    d.gamma2 = 80e9;
    d.gamma_L = 10.9e9;
    FdmGeometry g = fdm::geometry_from_rates(d);
    g.dnV = 1.96e-4;
    std::vector<double> lam, V{3.4, 3.8, 4.2, 4.6};
    for (int k = 0; k < st.range(0); ++k) lam.push_back(1546.0 + 5.0 * k / st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(fdm::transmission_map(g, lam, V, 0.8));
    st.SetItemsProcessed(st.iterations() * st.range(0) * 4);
}
BENCHMARK(BM_fdm_map)->Arg(2000);

void BM_purity(benchmark::State& st)
{
    jsa::JsaConfig c;
    c.gamma_i = c.gamma_p = 1.0;
    c.gamma_s = 1.0 / 10.0;
    c.grid.n_signal = c.grid.n_idler = static_cast<std::size_t>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(jsa::purity_fast(jsa::build_jsa(c)));
}
BENCHMARK(BM_purity)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_emission(benchmark::State& st)
{
    shaping::EmissionDesign d;
    d.tau_off_over_dt = 5.91;
    d.beta = 1.06;
    for (auto _ : st) benchmark::DoNotOptimize(shaping::evaluate_design(d).eta_out);
}
BENCHMARK(BM_emission)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
