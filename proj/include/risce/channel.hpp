#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "risce/config.hpp"
#include "risce/rng.hpp"

namespace risce {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cd = std::complex<double>;

struct SteeringVector {
    VectorXcd entries;
};

/// Rank-1 radar echo channel A = mu * a(theta) a(theta)^H.
struct SensingChannel {
    MatrixXcd A;
    cd mu;
};

struct CommChannels {
    MatrixXcd H;                // M x N, BS-RIS
    std::vector<VectorXcd> r;   // K vectors of length N, RIS-UE_k
    std::vector<MatrixXcd> G;   // K cascaded M x N matrices, H * diag(r_k)
};

struct SelfInterferenceChannel {
    MatrixXcd S; // M x M, known at the BS
};

/// Uniform linear array response: entries[m] = exp(j 2 pi (d/lambda) m sin(theta)).
inline SteeringVector steering_vector(double theta, int M, double spacing_ratio) {
    if (M < 1) throw std::invalid_argument("steering_vector: M must be >= 1");
    VectorXcd a(M);
    const double phase_step = 2.0 * std::numbers::pi * spacing_ratio * std::sin(theta);
    for (int m = 0; m < M; ++m)
        a(m) = std::polar(1.0, phase_step * m);
    return {std::move(a)};
}

/// Linear power gain PL_r * (d / d_ref)^(-zeta), with PL_r given in dBm-referenced dB.
inline double path_loss_linear(double d_m, double zeta, double pl_ref_dbm, double d_ref_m) {
    if (!(d_m > 0) || !(d_ref_m > 0))
        throw std::invalid_argument("path_loss_linear: distances must be > 0");
    return dbm_to_linear(pl_ref_dbm) * std::pow(d_m / d_ref_m, -zeta);
}

inline SensingChannel draw_sensing_channel(const SystemConfig& cfg, Rng& rng) {
    cfg.validate();
    const double amp = std::sqrt(path_loss_linear(cfg.d1_m, cfg.zeta1, cfg.pl_ref_dbm, cfg.d_ref_m));
    const cd mu = std::polar(amp, rng.uniform(0.0, 2.0 * std::numbers::pi));
    const VectorXcd a = steering_vector(cfg.theta_target_rad, cfg.M, cfg.spacing_ratio).entries;
    SensingChannel ch;
    ch.mu = mu;
    ch.A = mu * (a * a.adjoint());
    return ch;
}

/// Rician mixture sqrt(pl) * (K1/(K1+1) hbar + 1/(K1+1) htilde) with
/// hbar = a(theta_dep) a(theta_arr)^H and htilde i.i.d. CN(0,1).
/// The mixture weights are used as stated, without square roots.
inline MatrixXcd draw_rician_matrix(int rows, int cols, double K1, double pl_linear,
                                    double theta_dep, double theta_arr,
                                    double spacing_ratio, Rng& rng) {
    if (K1 < 0) throw std::invalid_argument("draw_rician_matrix: K1 must be >= 0");
    MatrixXcd htilde(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            htilde(i, j) = rng.cnormal();
    const double w_los = K1 / (K1 + 1.0);
    const double w_nlos = 1.0 / (K1 + 1.0);
    MatrixXcd h = w_nlos * htilde;
    if (w_los > 0) {
        const VectorXcd ad = steering_vector(theta_dep, rows, spacing_ratio).entries;
        const VectorXcd aa = steering_vector(theta_arr, cols, spacing_ratio).entries;
        h += w_los * (ad * aa.adjoint());
    }
    return std::sqrt(pl_linear) * h;
}

/// Cascaded channel G_k = H diag(r_k).
inline MatrixXcd cascade(const MatrixXcd& H, const VectorXcd& r_k) {
    if (H.cols() != r_k.size())
        throw std::invalid_argument("cascade: H columns must match r_k length");
    return H * r_k.asDiagonal();
}

inline CommChannels draw_comm_channels(const SystemConfig& cfg, Rng& rng) {
    cfg.validate();
    const double pl_H = path_loss_linear(cfg.d2_m, cfg.zeta2, cfg.pl_ref_dbm, cfg.d_ref_m);
    const double pl_r = path_loss_linear(cfg.d3_m, cfg.zeta3, cfg.pl_ref_dbm, cfg.d_ref_m);
    CommChannels ch;
    ch.H = draw_rician_matrix(cfg.M, cfg.N, cfg.K1_H, pl_H,
                              cfg.theta_aod_rad, cfg.theta_aoa_rad, cfg.spacing_ratio, rng);
    ch.r.reserve(cfg.K);
    ch.G.reserve(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
        MatrixXcd rk = draw_rician_matrix(cfg.N, 1, cfg.K1_r, pl_r,
                                          cfg.theta_aod_rad, cfg.theta_aoa_rad, cfg.spacing_ratio, rng);
        ch.r.push_back(rk.col(0));
        ch.G.push_back(cascade(ch.H, ch.r.back()));
    }
    return ch;
}

/// S with i.i.d. CN(0, si_gain^2) entries; deterministic given the stream.
inline SelfInterferenceChannel draw_si_channel(const SystemConfig& cfg, Rng& rng) {
    cfg.validate();
    MatrixXcd S(cfg.M, cfg.M);
    for (int j = 0; j < cfg.M; ++j)
        for (int i = 0; i < cfg.M; ++i)
            S(i, j) = cfg.si_gain * rng.cnormal();
    return {std::move(S)};
}

} // namespace risce
