#include "ringfc/data.hpp"

#include "ringfc/errors.hpp"
#include "ringfc/units.hpp"

#include <cmath>

namespace ringfc {

namespace {

bool strictly_monotone(const std::vector<double>& v)
{
    if (v.size() < 2) return true;
    const bool up = v[1] > v[0];
    for (std::size_t i = 1; i < v.size(); ++i)
        if (up ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
    return true;
}

} // namespace

void MeasuredMap::validate(double slack) const
{
    if (wavelength_nm.empty() || voltage.empty()) throw DataError("map " + dataset_id + ": empty grid");
    if (!strictly_monotone(wavelength_nm)) throw DataError("map " + dataset_id + ": wavelength grid not strictly monotone");
    if (!strictly_monotone(voltage)) throw DataError("map " + dataset_id + ": voltage grid not strictly monotone");
    if (transmission.rows() != static_cast<Eigen::Index>(voltage.size())
        || transmission.cols() != static_cast<Eigen::Index>(wavelength_nm.size()))
        throw DataError("map " + dataset_id + ": transmission shape does not match grids");
    for (Eigen::Index i = 0; i < transmission.size(); ++i) {
        const double t = transmission.data()[i];
        if (!std::isfinite(t) || t < -slack || t > 1.0 + slack)
            throw DataError("map " + dataset_id + ": transmission outside [0, 1]");
    }
    if (idler) {
        const auto n = idler->wavelength_nm.size();
        if (n == 0 || idler->p_i_plus.size() != n || idler->p_i_minus.size() != n)
            throw DataError("map " + dataset_id + ": idler columns have inconsistent lengths");
    }
}

std::vector<double> MeasuredMap::omega_grid() const
{
    std::vector<double> w(wavelength_nm.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = omega_from_wavelength(wavelength_nm[i] * 1e-9);
    return w;
}

} // namespace ringfc
