#pragma once

#include <numbers>

namespace ringfc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kTelecomWavelength = 1550e-9;  // m

double omega_from_wavelength(double lambda_m);
double wavelength_from_omega(double omega);
double dbm_to_watts(double dbm);
double watts_to_dbm(double w);
double db_to_power_ratio(double db);
double power_ratio_to_db(double ratio);
// amplitude coupling |t| from a power ratio expressed in dB
double db_to_amplitude(double db);

// Throws DomainError naming the field when v is negative or not finite.
void require_non_negative(double v, const char* field);
void require_positive(double v, const char* field);
void require_finite(double v, const char* field);

} // namespace ringfc
