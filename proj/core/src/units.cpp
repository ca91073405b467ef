#include "ringfc/units.hpp"

#include "ringfc/errors.hpp"

#include <cmath>
#include <string>

namespace ringfc {

double omega_from_wavelength(double lambda_m)
{
    require_positive(lambda_m, "wavelength");
    return 2.0 * kPi * kSpeedOfLight / lambda_m;
}

double wavelength_from_omega(double omega)
{
    require_positive(omega, "omega");
    return 2.0 * kPi * kSpeedOfLight / omega;
}

double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double watts_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }

double db_to_power_ratio(double db) { return std::pow(10.0, db / 10.0); }

double power_ratio_to_db(double ratio) { return 10.0 * std::log10(ratio); }

double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

void require_finite(double v, const char* field)
{
    if (!std::isfinite(v))
        throw DomainError(std::string(field) + " must be finite");
}

void require_non_negative(double v, const char* field)
{
    require_finite(v, field);
    if (v < 0.0)
        throw DomainError(std::string(field) + " must be non-negative, got " + std::to_string(v));
}

void require_positive(double v, const char* field)
{
    require_finite(v, field);
    if (!(v > 0.0))
        throw DomainError(std::string(field) + " must be positive, got " + std::to_string(v));
}

} // namespace ringfc
