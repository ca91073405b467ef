#pragma once

#include "ringfc/data.hpp"
#include "ringfc/params.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ringfc::fit {

// Three ring-1 modes (i-, s, i+) and the ring-2 resonance seen in a linear transmission map.
struct CmmMapModel {
    CmmParams rates;       // gamma, gamma_L1, gamma_L2, g, and for pumped data gamma_FCA, chi_bar
    double A = 0.0;        // heater offset, rad/s
    double B = 0.0;        // heater quadratic coefficient, rad/s/V^2
    double omega_b = 0.0;  // ring-2 resonance
    double offset_s = 0.0;   // omega_s - omega_i-
    double offset_ip = 0.0;  // omega_i+ - omega_i-
    double T_cpl = 1.0;

    double omega_i_minus(double V, double delta_nl = 0.0) const;
    CmmParams at(double V, double delta_nl = 0.0) const;
    double transmission(double omega, double V, double delta_nl = 0.0) const;
    // Idler powers for a signal of power P_s swept to omega (undepleted signal).
    double idler_plus(double omega, double V, double delta_nl, double P_s) const;
    double idler_minus(double omega, double V, double delta_nl, double P_s) const;
};

enum class Stage { linear_cmm, pumped_cmm, fdm };
const char* stage_name(Stage s);

struct FitParameter {
    std::string name;
    double value;
    double uncertainty;
};

struct FitResult {
    Stage stage = Stage::linear_cmm;
    std::vector<FitParameter> parameters;
    double residual_norm = 0.0;
    std::vector<double> delta_nl;
    std::vector<std::string> dataset_ids;
    std::vector<double> cost_history;  // residual norm after every optimizer iteration
    int iterations = 0;
    int evaluations = 0;
    std::size_t n_residuals = 0;
    std::vector<std::string> warnings;
    std::optional<CmmMapModel> cmm;
    std::optional<FdmGeometry> fdm;
    double T_cpl = 1.0;

    double value(const std::string& name) const;
    double uncertainty(const std::string& name) const;
};

struct LinearFitOptions {
    double window_linewidths = 3.0;
    int max_iterations = 300;
    std::optional<CmmMapModel> initial;  // skips the data-driven initialization
};

FitResult fit_linear_cmm(std::span<const MeasuredMap> maps, const LinearFitOptions& opt = {});
// Data-driven starting point used by fit_linear_cmm.
CmmMapModel initialize_linear_cmm(std::span<const MeasuredMap> maps);

struct PumpedDataset {
    MeasuredMap map;  // one voltage row, idler spectra attached
    double signal_power = 0.0;  // W in the bus before the ring
};

struct PumpedFitOptions {
    double window_linewidths = 3.0;
    int max_iterations = 300;
};

FitResult fit_pumped(std::span<const PumpedDataset> data, const FitResult& linear, const PumpedFitOptions& opt = {});

struct FdmFitOptions {
    FdmGeometry initial;  // L1, L2, omega_ref and the index prior are taken from here
    double T_cpl_initial = 0.0;  // 0: off-resonance estimate
    bool auto_initialize = true;
    int max_iterations = 300;
};

FitResult fit_fdm(std::span<const MeasuredMap> maps, const FdmFitOptions& opt);

struct NoiseModel {
    double sigma = 0.0;  // multiplicative Gaussian
};

MeasuredMap generate_synthetic(const CmmMapModel& truth, std::span<const double> wavelength_nm,
                               std::span<const double> voltage, const NoiseModel& noise, std::uint64_t seed);
MeasuredMap generate_synthetic(const FdmGeometry& truth, double T_cpl, std::span<const double> wavelength_nm,
                               std::span<const double> voltage, const NoiseModel& noise, std::uint64_t seed);

// One dataset per (voltage, delta_nl) pair; idler spectra on the same wavelength grid.
std::vector<PumpedDataset> generate_pumped(const CmmMapModel& truth, std::span<const double> voltage,
                                           std::span<const double> delta_nl, double signal_power,
                                           std::span<const double> wavelength_nm, const NoiseModel& noise,
                                           std::uint64_t seed);

} // namespace ringfc::fit
