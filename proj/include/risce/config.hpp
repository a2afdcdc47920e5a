#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace risce {

inline double dbm_to_linear(double dbm) { return std::pow(10.0, dbm / 10.0); }

/// Physical and protocol constants of the simulated system.
/// Defaults follow the reference scenario: K = 3, M = 4, N = 30, half-wavelength
/// spacing, -20 dBm transmit power. The pilot protocol ties P = M and C = N.
struct SystemConfig {
    int M = 4;  // transmit antennas
    int N = 30; // RIS elements
    int K = 3;  // downlink users

    double spacing_ratio = 0.5; // antenna spacing d / wavelength
    double K1_H = 10.0;         // Rician factor of the BS-RIS link
    double K1_r = 0.0;          // Rician factor of the RIS-UE links (Rayleigh)

    double pl_ref_dbm = -30.0; // reference path loss at d_ref
    double d_ref_m = 1.0;
    double d1_m = 140.0; // BS-target-BS
    double d2_m = 50.0;  // BS-RIS
    double d3_m = 2.0;   // RIS-UE
    double zeta1 = 3.0;
    double zeta2 = 2.3;
    double zeta3 = 2.0;

    double tx_power_dbm = -20.0;

    double theta_target_rad = -2.0 * std::numbers::pi / 3.0;
    double theta_aod_rad = std::numbers::pi / 3.0;
    double theta_aoa_rad = std::numbers::pi / 3.0;

    double si_gain = 1.0; // amplitude scale of the self-interference channel
    double rho = 1e4;     // target scaling factor

    std::uint64_t seed = 1;

    int P() const { return M; } // pilot slots per sub-frame
    int C() const { return N; } // sub-frames

    double tx_power_linear() const { return dbm_to_linear(tx_power_dbm); }

    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument("SystemConfig: " + msg); };
        if (M < 1) fail("M must be >= 1");
        if (N < 1) fail("N must be >= 1");
        if (K < 1) fail("K must be >= 1");
        if (!(spacing_ratio > 0)) fail("spacing_ratio must be > 0");
        if (K1_H < 0 || K1_r < 0) fail("Rician factor must be >= 0");
        if (!(d_ref_m > 0) || !(d1_m > 0) || !(d2_m > 0) || !(d3_m > 0)) fail("distances must be > 0");
        if (!(rho > 0)) fail("rho must be > 0");
        if (si_gain < 0) fail("si_gain must be >= 0");
    }
};

} // namespace risce
