#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ringfc {

struct IdlerSpectra {
    std::vector<double> wavelength_nm;
    std::vector<double> p_i_plus;   // W
    std::vector<double> p_i_minus;  // W
};

// Transmission vs (voltage, wavelength). Row i is voltage[i], column j is wavelength_nm[j].
struct MeasuredMap {
    std::vector<double> wavelength_nm;
    std::vector<double> voltage;
    Eigen::MatrixXd transmission;
    std::string dataset_id;
    std::optional<IdlerSpectra> idler;

    // grids strictly monotone, shapes consistent, transmission finite and in [0, 1 + slack]
    void validate(double slack = 0.5) const;
    std::vector<double> omega_grid() const;  // rad/s, same order as wavelength_nm
};

} // namespace ringfc
