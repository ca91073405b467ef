#include "ringfc/jsa.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/units.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace ringfc::jsa {

namespace {

constexpr cplx I{0.0, 1.0};

cplx lorentzian(double gamma, double w) { return 1.0 / (0.5 * gamma + I * w); }

template <class F>
cplx integrate(F f, double a, double b)
{
    using boost::math::quadrature::gauss_kronrod;
    const double re = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).real(); }, a, b, 15, 1e-12);
    const double im = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).imag(); }, a, b, 15, 1e-12);
    return {re, im};
}

} // namespace

SpectralAxis SpectralAxis::lorentzian_mapped(double scale, std::size_t n)
{
    require_positive(scale, "axis scale");
    SpectralAxis ax;
    ax.nodes.resize(n);
    ax.weights.resize(n);
    const double h = kPi / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double th = -0.5 * kPi + (static_cast<double>(k) + 0.5) * h;
        const double c = std::cos(th);
        ax.nodes[k] = scale * std::tan(th);
        ax.weights[k] = scale * h / (c * c);
    }
    return ax;
}

SpectralAxis SpectralAxis::mixture_mapped(double scale_a, double scale_b, std::size_t n)
{
    require_positive(scale_a, "axis scale");
    require_positive(scale_b, "axis scale");
    if (scale_a == scale_b) return lorentzian_mapped(scale_a, n);
    const double lo_s = std::min(scale_a, scale_b), hi_s = std::max(scale_a, scale_b);
    auto cdf = [&](double x) { return 0.5 + (std::atan(x / scale_a) + std::atan(x / scale_b)) / (2.0 * kPi); };
    auto pdf = [&](double x) {
        return (scale_a / (scale_a * scale_a + x * x) + scale_b / (scale_b * scale_b + x * x)) / (2.0 * kPi);
    };
    SpectralAxis ax;
    ax.nodes.resize(n);
    ax.weights.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
        const double t = std::tan(kPi * (u - 0.5));
        double a = std::min(lo_s * t, hi_s * t), b = std::max(lo_s * t, hi_s * t);
        for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
            const double m = 0.5 * (a + b);
            (cdf(m) < u ? a : b) = m;
        }
        ax.nodes[k] = 0.5 * (a + b);
        ax.weights[k] = 1.0 / (static_cast<double>(n) * pdf(ax.nodes[k]));
    }
    return ax;
}

SpectralAxis SpectralAxis::uniform(double half_span, std::size_t n)
{
    require_positive(half_span, "half_span");
    SpectralAxis ax;
    ax.nodes.resize(n);
    ax.weights.assign(n, 2.0 * half_span / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k)
        ax.nodes[k] = -half_span + (static_cast<double>(k) + 0.5) * ax.weights[k];
    return ax;
}

double SpectralAxis::central_spacing() const
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < nodes.size(); ++k) best = std::min(best, nodes[k] - nodes[k - 1]);
    return best;
}

double SpectralAxis::span() const { return nodes.empty() ? 0.0 : nodes.back() - nodes.front(); }

cplx PumpSpectrum::operator()(double w) const
{
    if (flat()) return 1.0;
    if (w < omega.front() || w > omega.back()) return 0.0;
    const auto it = std::upper_bound(omega.begin(), omega.end(), w);
    if (it == omega.end()) return amplitude.back();
    const std::size_t k = static_cast<std::size_t>(it - omega.begin());
    const double f = (w - omega[k - 1]) / (omega[k] - omega[k - 1]);
    return (1.0 - f) * amplitude[k - 1] + f * amplitude[k];
}

cplx pump_function(double gamma_p, double omega, const PumpSpectrum& pump, PumpMethod method)
{
    require_positive(gamma_p, "gamma_p");
    if (method == PumpMethod::analytic) {
        if (!pump.flat()) throw ConfigError("analytic pump function needs a flat pump spectrum");
        return 2.0 * kPi / (gamma_p + I * omega);
    }
    auto f = [&](double x) { return pump(x) * lorentzian(gamma_p, x) * pump(omega - x) * lorentzian(gamma_p, omega - x); };
    if (pump.flat()) {
        // integrand is symmetric about omega/2
        return 2.0 * integrate(f, -std::numeric_limits<double>::infinity(), 0.5 * omega);
    }
    const double lo = std::max(pump.omega.front(), omega - pump.omega.back());
    const double hi = std::min(pump.omega.back(), omega - pump.omega.front());
    if (!(hi > lo)) return 0.0;
    return integrate(f, lo, hi);
}

Eigen::MatrixXcd Jsa::weighted() const
{
    Eigen::MatrixXcd M = amplitude;
    for (Eigen::Index r = 0; r < M.rows(); ++r)
        for (Eigen::Index c = 0; c < M.cols(); ++c)
            M(r, c) *= std::sqrt(signal.weights[static_cast<std::size_t>(r)] * idler.weights[static_cast<std::size_t>(c)]);
    return M;
}

double linewidth_from_q(double omega, double Q)
{
    require_positive(Q, "Q");
    return omega / Q;
}

namespace {

void check_resolution(const SpectralAxis& ax, double width, const char* name)
{
    if (ax.nodes.size() < 2 || width / ax.central_spacing() < 8.0)
        throw ResolutionError(std::string(name) + " axis has fewer than 8 points per linewidth");
}

} // namespace

Jsa build_jsa(const JsaConfig& cfg)
{
    require_positive(cfg.gamma_s, "gamma_s");
    require_positive(cfg.gamma_i, "gamma_i");
    require_positive(cfg.gamma_p, "gamma_p");
    Jsa j;
    if (cfg.grid.kind == GridKind::mapped) {
        j.signal = SpectralAxis::mixture_mapped(0.5 * cfg.gamma_s, 0.5 * std::max(cfg.gamma_i, cfg.gamma_p), cfg.grid.n_signal);
        j.idler = SpectralAxis::mixture_mapped(0.5 * cfg.gamma_i, 0.5 * std::max(cfg.gamma_s, cfg.gamma_p), cfg.grid.n_idler);
    } else {
        const double hs = cfg.grid.half_span > 0.0 ? cfg.grid.half_span
                                                   : 12.0 * 0.5 * std::max({cfg.gamma_s, cfg.gamma_i, cfg.gamma_p});
        j.signal = SpectralAxis::uniform(hs, cfg.grid.n_signal);
        j.idler = SpectralAxis::uniform(hs, cfg.grid.n_idler);
        const double narrow = std::min({cfg.gamma_s, cfg.gamma_i, cfg.gamma_p});
        if (2.0 * hs < 10.0 * narrow) throw ResolutionError("grid spans fewer than 10 linewidths");
    }
    check_resolution(j.signal, std::min(cfg.gamma_s, cfg.gamma_p), "signal");
    check_resolution(j.idler, std::min(cfg.gamma_i, cfg.gamma_p), "idler");

    const auto ns = static_cast<Eigen::Index>(j.signal.nodes.size());
    const auto ni = static_cast<Eigen::Index>(j.idler.nodes.size());
    j.amplitude.resize(ns, ni);
    for (Eigen::Index r = 0; r < ns; ++r) {
        const double ws = j.signal.nodes[static_cast<std::size_t>(r)];
        const cplx ls = lorentzian(cfg.gamma_s, ws);
        for (Eigen::Index c = 0; c < ni; ++c) {
            const double wi = j.idler.nodes[static_cast<std::size_t>(c)];
            j.amplitude(r, c) = pump_function(cfg.gamma_p, ws + wi, cfg.pump, cfg.method) * lorentzian(cfg.gamma_i, wi) * ls;
        }
    }
    const double n2 = j.weighted().squaredNorm();
    if (!std::isfinite(n2) || n2 <= 0.0) throw DataError("JSA has zero or non-finite norm");
    j.norm = std::sqrt(n2);
    j.amplitude /= j.norm;
    return j;
}

SchmidtSpectrum schmidt_decompose(const Jsa& jsa, std::size_t K)
{
    if (!jsa.amplitude.allFinite()) throw DataError("JSA contains non-finite entries");
    const Eigen::MatrixXcd M = jsa.weighted();
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
    Eigen::VectorXd s = svd.singularValues();
    const double total = s.squaredNorm();
    if (!(total > 0.0)) throw DataError("JSA has zero norm");
    s /= std::sqrt(total);
    SchmidtSpectrum out;
    out.K = std::min<std::size_t>(K, static_cast<std::size_t>(s.size()));
    for (std::size_t k = 0; k < out.K; ++k) out.lambda.push_back(s[static_cast<Eigen::Index>(k)]);
    out.purity = s.array().pow(4).sum();
    return out;
}

double purity_fast(const Jsa& jsa)
{
    const Eigen::MatrixXcd M = jsa.weighted();
    const double n2 = M.squaredNorm();
    Eigen::MatrixXcd R(M.cols(), M.cols());
    R.noalias() = M.adjoint() * M;
    return R.squaredNorm() / (n2 * n2);
}

namespace {

double purity_on_grid(double ratio, std::size_t n, GridKind kind)
{
    JsaConfig cfg;
    cfg.gamma_i = 1.0;
    cfg.gamma_p = 1.0;
    cfg.gamma_s = 1.0 / ratio;
    cfg.grid.kind = kind;
    cfg.grid.n_signal = n;
    cfg.grid.n_idler = n;
    return purity_fast(build_jsa(cfg));
}

} // namespace

PurityPoint purity_at_ratio(double ratio, const PurityOptions& opt)
{
    if (!(ratio >= 1.0)) throw DomainError("quality-factor ratio must be >= 1");
    PurityPoint pt;
    pt.ratio = ratio;
    std::size_t n = opt.n_start;
    double prev = purity_on_grid(ratio, n, opt.kind);
    bool converged = false;
    for (int k = 0; k < opt.max_refinements; ++k) {
        n *= 2;
        const double cur = purity_on_grid(ratio, n, opt.kind);
        pt.last_change = std::abs(cur - prev);
        prev = cur;
        if (pt.last_change < opt.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) throw ConvergenceError("purity did not converge after grid refinements at ratio " + std::to_string(ratio));
    pt.purity = prev;
    pt.n_grid = n;

    JsaConfig cfg;
    cfg.gamma_s = 1.0 / ratio;
    cfg.grid.kind = opt.kind;
    cfg.grid.n_signal = cfg.grid.n_idler = n;
    const Eigen::MatrixXcd M = build_jsa(cfg).weighted();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M.adjoint() * M, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();  // ascending
    for (std::size_t k = 0; k < opt.top && k < static_cast<std::size_t>(ev.size()); ++k)
        pt.lambda_top.push_back(std::sqrt(std::max(0.0, ev[ev.size() - 1 - static_cast<Eigen::Index>(k)])));
    return pt;
}

std::vector<PurityPoint> purity_sweep(std::span<const double> ratios, const PurityOptions& opt, int jobs)
{
    std::vector<PurityPoint> out(ratios.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t k; (k = next++) < ratios.size();) {
            try {
                out[k] = purity_at_ratio(ratios[k], opt);
            } catch (...) {
                std::lock_guard lk(m);
                if (!err) err = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(jobs, static_cast<int>(ratios.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return out;
}

} // namespace ringfc::jsa
