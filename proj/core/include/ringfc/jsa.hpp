#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ringfc::jsa {

using cplx = std::complex<double>;

// Quadrature nodes and weights along one detuning axis.
struct SpectralAxis {
    std::vector<double> nodes;
    std::vector<double> weights;

    // Midpoint rule after Omega = scale * tan(theta); covers the whole line.
    static SpectralAxis lorentzian_mapped(double scale, std::size_t n);
    // Midpoint rule in the CDF of an equal mixture of two Lorentzian densities.
    // Resolves a narrow line and structure on a broader scale with one node set.
    static SpectralAxis mixture_mapped(double scale_a, double scale_b, std::size_t n);
    static SpectralAxis uniform(double half_span, std::size_t n);
    // Smallest node spacing near Omega = 0.
    double central_spacing() const;
    double span() const;
};

enum class GridKind { mapped, uniform };

struct GridSpec {
    GridKind kind = GridKind::mapped;
    std::size_t n_signal = 512;
    std::size_t n_idler = 512;
    // uniform grids only; 0 selects 12 * max(Gamma)/2
    double half_span = 0.0;
};

struct PumpSpectrum {
    // empty means flat (A_p = 1 everywhere)
    std::vector<double> omega;
    std::vector<cplx> amplitude;

    bool flat() const { return omega.empty(); }
    cplx operator()(double w) const;  // linear interpolation, zero outside the samples
};

enum class PumpMethod { analytic, quadrature };

// Self-convolution of A_p * l_p. The analytic path needs a flat pump.
cplx pump_function(double gamma_p, double omega, const PumpSpectrum& pump, PumpMethod method);

struct JsaConfig {
    double gamma_s = 1.0;  // total linewidths, rad/s
    double gamma_i = 1.0;
    double gamma_p = 1.0;
    PumpSpectrum pump;
    PumpMethod method = PumpMethod::analytic;
    GridSpec grid;
};

struct Jsa {
    SpectralAxis signal;
    SpectralAxis idler;
    Eigen::MatrixXcd amplitude;  // rows signal, columns idler
    double norm = 0.0;           // L2 norm before normalization

    Eigen::MatrixXcd weighted() const;  // A_kl sqrt(w_k w_l)
};

double linewidth_from_q(double omega, double Q);

// Throws ResolutionError when an axis has fewer than 8 points per relevant linewidth.
Jsa build_jsa(const JsaConfig& cfg);

struct SchmidtSpectrum {
    std::vector<double> lambda;  // descending, first K
    double purity = 0.0;         // sum lambda^4 over the full spectrum
    std::size_t K = 0;
};

SchmidtSpectrum schmidt_decompose(const Jsa& jsa, std::size_t K);
// Tr(rho^2) = ||M^H M||_F^2 without a decomposition.
double purity_fast(const Jsa& jsa);

struct PurityOptions {
    std::size_t n_start = 128;
    int max_refinements = 4;
    double tolerance = 1e-4;
    std::size_t top = 8;
    GridKind kind = GridKind::mapped;
};

struct PurityPoint {
    double ratio = 0.0;
    double purity = 0.0;
    std::size_t n_grid = 0;
    double last_change = 0.0;
    std::vector<double> lambda_top;
};

// Flat pump, Q_p = Q_i, Gamma_s = Gamma_i / ratio.
PurityPoint purity_at_ratio(double ratio, const PurityOptions& opt = {});
std::vector<PurityPoint> purity_sweep(std::span<const double> ratios, const PurityOptions& opt = {}, int jobs = 1);

} // namespace ringfc::jsa
