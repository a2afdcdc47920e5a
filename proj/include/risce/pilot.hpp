#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "risce/channel.hpp"
#include "risce/rng.hpp"

namespace risce {

struct PilotMatrix {
    MatrixXcd X; // M x P, X X^H = P_tx I
};

struct PhaseMatrix {
    MatrixXcd Theta; // N x C, unit-modulus entries, Theta Theta^H = N I
};

struct ReceivedUE {
    MatrixXcd Y; // C x P, row c is the c-th sub-frame observation
    double snr_db = 0.0;
    int k = 0;
};

struct ReceivedBS {
    std::vector<MatrixXcd> Y; // C matrices, each M x P
    double snr_db = 0.0;
};

/// DFT pilot: X[m,p] = sqrt(P_tx / M) exp(j 2 pi m p / M), so X X^H = P_tx I.
inline PilotMatrix build_pilot_matrix(int M, int P, double tx_power_linear) {
    if (P != M) throw std::invalid_argument("build_pilot_matrix: requires P = M");
    if (M < 1) throw std::invalid_argument("build_pilot_matrix: M must be >= 1");
    const double amp = std::sqrt(tx_power_linear / M);
    MatrixXcd X(M, P);
    for (int p = 0; p < P; ++p)
        for (int m = 0; m < M; ++m)
            X(m, p) = std::polar(amp, 2.0 * std::numbers::pi * m * p / M);
    return {std::move(X)};
}

/// DFT phase schedule: Theta[n,c] = exp(j 2 pi n c / N), full reflection (beta = 1).
inline PhaseMatrix build_phase_matrix(int N, int C) {
    if (C != N) throw std::invalid_argument("build_phase_matrix: requires C = N");
    if (N < 1) throw std::invalid_argument("build_phase_matrix: N must be >= 1");
    MatrixXcd Theta(N, C);
    for (int c = 0; c < C; ++c)
        for (int n = 0; n < N; ++n)
            Theta(n, c) = std::polar(1.0, 2.0 * std::numbers::pi * n * c / N);
    return {std::move(Theta)};
}

/// sigma^2 = p_ch / 10^(snr/10) with p_ch the mean per-entry channel power.
inline double noise_variance_from_snr(const MatrixXcd& channel, double snr_db) {
    const double p_ch = channel.squaredNorm() / static_cast<double>(channel.size());
    if (p_ch <= 0.0) throw std::invalid_argument("noise_variance_from_snr: zero channel");
    return p_ch / std::pow(10.0, snr_db / 10.0);
}

/// Row c = theta_c^H G_k^H X + n_c, complex AWGN with per-entry variance sigma2.
inline ReceivedUE synthesize_ue_rx(const MatrixXcd& G_k, const MatrixXcd& Theta,
                                   const MatrixXcd& X, double sigma2, Rng& rng) {
    if (sigma2 < 0) throw std::invalid_argument("synthesize_ue_rx: sigma2 must be >= 0");
    if (G_k.cols() != Theta.rows() || G_k.rows() != X.rows())
        throw std::invalid_argument("synthesize_ue_rx: dimension mismatch");
    const int C = static_cast<int>(Theta.cols());
    const int P = static_cast<int>(X.cols());
    ReceivedUE rx;
    rx.Y.resize(C, P);
    const double nstd = std::sqrt(sigma2);
    for (int c = 0; c < C; ++c) {
        Eigen::RowVectorXcd row = Theta.col(c).adjoint() * G_k.adjoint() * X;
        if (sigma2 > 0)
            for (int p = 0; p < P; ++p)
                row(p) += nstd * rng.cnormal();
        rx.Y.row(c) = row;
    }
    return rx;
}

/// Y_c = A^H X + S^H X + N_c for each of the C sub-frames.
inline ReceivedBS synthesize_bs_rx(const MatrixXcd& A, const MatrixXcd& S,
                                   const MatrixXcd& X, double sigma2, Rng& rng, int C) {
    if (sigma2 < 0) throw std::invalid_argument("synthesize_bs_rx: sigma2 must be >= 0");
    if (A.rows() != X.rows() || S.rows() != X.rows() || A.cols() != A.rows() || S.cols() != S.rows())
        throw std::invalid_argument("synthesize_bs_rx: dimension mismatch");
    const int M = static_cast<int>(X.rows());
    const int P = static_cast<int>(X.cols());
    const MatrixXcd signal = A.adjoint() * X + S.adjoint() * X;
    const double nstd = std::sqrt(sigma2);
    ReceivedBS rx;
    rx.Y.reserve(C);
    for (int c = 0; c < C; ++c) {
        MatrixXcd Yc = signal;
        if (sigma2 > 0)
            for (int p = 0; p < P; ++p)
                for (int m = 0; m < M; ++m)
                    Yc(m, p) += nstd * rng.cnormal();
        rx.Y.push_back(std::move(Yc));
    }
    return rx;
}

/// Subtract the known S^H X term from every sub-frame.
inline ReceivedBS compensate_si(const ReceivedBS& rx, const MatrixXcd& S, const MatrixXcd& X) {
    const MatrixXcd si = S.adjoint() * X;
    ReceivedBS out;
    out.snr_db = rx.snr_db;
    out.Y.reserve(rx.Y.size());
    for (const auto& Yc : rx.Y)
        out.Y.push_back(Yc - si);
    return out;
}

} // namespace risce
