#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "risce/io.hpp"
#include "risce/pilot.hpp"

namespace risce {

enum class Link { sensing, communication };

inline const char* link_name(Link l) { return l == Link::sensing ? "sensing" : "communication"; }

inline Link link_from_name(const std::string& s) {
    if (s == "sensing") return Link::sensing;
    if (s == "communication" || s == "comm") return Link::communication;
    throw std::invalid_argument("unknown link: " + s);
}

/// One (q, v) entry: real-valued network input R and target O.
/// Sensing: |R| = 2MP, |O| = 2M^2. Communication: |R| = 2CP, |O| = 2MN.
struct SamplePair {
    std::vector<double> R;
    std::vector<double> O;
    double snr_db = 0.0;
    int q = 0;
    int v = 0;
    int k = 0; // user index, communication only
    Link link = Link::sensing;
};

struct DatasetMeta {
    SystemConfig config;
    Link link = Link::sensing;
    int Q = 0;
    int V = 0;
    int user_k = 0;
    std::vector<double> snr_grid_db;
    std::uint64_t seed = 0;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<SamplePair> pairs;
};

struct NormalizationRecord {
    double mean = 0.0;
    double std = 1.0;
};

namespace detail {

inline std::vector<double> re_im_flatten(const MatrixXcd& m) {
    const auto n = static_cast<std::size_t>(m.size());
    std::vector<double> out(2 * n);
    // column-major vec
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = m.data()[i].real();
        out[n + i] = m.data()[i].imag();
    }
    return out;
}

} // namespace detail

/// Sensing input: sub-frame average of the SI-compensated BS observations,
/// flattened as [Re(vec), Im(vec)]. Target: [Re(vec(A)), Im(vec(A))].
inline SamplePair build_sensing_pair(const MatrixXcd& A, const ReceivedBS& received) {
    if (received.Y.empty()) throw std::invalid_argument("build_sensing_pair: empty observation");
    MatrixXcd avg = received.Y.front();
    for (std::size_t c = 1; c < received.Y.size(); ++c) {
        if (received.Y[c].rows() != avg.rows() || received.Y[c].cols() != avg.cols())
            throw std::invalid_argument("build_sensing_pair: inconsistent sub-frame shapes");
        avg += received.Y[c];
    }
    avg /= static_cast<double>(received.Y.size());
    SamplePair p;
    p.link = Link::sensing;
    p.snr_db = received.snr_db;
    p.R = detail::re_im_flatten(avg);
    p.O = detail::re_im_flatten(A);
    return p;
}

/// Communication input: all C sub-frame rows, sub-frame-major, Re block then
/// Im block (length 2CP). Target: [Re(vec(G_k)), Im(vec(G_k))].
inline SamplePair build_comm_pair(const MatrixXcd& G_k, const ReceivedUE& received) {
    const auto C = received.Y.rows();
    const auto P = received.Y.cols();
    if (C < 1 || P < 1) throw std::invalid_argument("build_comm_pair: empty observation");
    SamplePair p;
    p.link = Link::communication;
    p.snr_db = received.snr_db;
    p.k = received.k;
    const auto n = static_cast<std::size_t>(C * P);
    p.R.resize(2 * n);
    for (Eigen::Index c = 0; c < C; ++c)
        for (Eigen::Index pp = 0; pp < P; ++pp) {
            p.R[static_cast<std::size_t>(c * P + pp)] = received.Y(c, pp).real();
            p.R[n + static_cast<std::size_t>(c * P + pp)] = received.Y(c, pp).imag();
        }
    p.O = detail::re_im_flatten(G_k);
    return p;
}

/// For each grid SNR and each q: one noiseless pair (v = 1) and V-1 noisy
/// duplicates with AWGN at the channel-power SNR. Deterministic given seed.
inline Dataset generate_dataset(const SystemConfig& cfg, const std::vector<double>& snr_grid_db,
                                int Q, int V, Link link, std::uint64_t seed, int user_k = 0) {
    cfg.validate();
    if (Q < 1 || V < 1) throw std::invalid_argument("generate_dataset: Q and V must be >= 1");
    if (snr_grid_db.empty()) throw std::invalid_argument("generate_dataset: empty SNR grid");
    if (user_k < 0 || user_k >= cfg.K) throw std::invalid_argument("generate_dataset: user index out of range");

    const PilotMatrix X = build_pilot_matrix(cfg.M, cfg.P(), cfg.tx_power_linear());
    const PhaseMatrix Theta = build_phase_matrix(cfg.N, cfg.C());
    const Rng base(seed);
    // S is fixed per configuration seed, shared by all realizations.
    Rng si_rng = base.derive(0x51, 0xfade);
    const SelfInterferenceChannel si = draw_si_channel(cfg, si_rng);

    Dataset ds;
    ds.meta.config = cfg;
    ds.meta.link = link;
    ds.meta.Q = Q;
    ds.meta.V = V;
    ds.meta.user_k = user_k;
    ds.meta.snr_grid_db = snr_grid_db;
    ds.meta.seed = seed;
    ds.pairs.reserve(static_cast<std::size_t>(Q) * V * snr_grid_db.size());

    const std::uint64_t link_salt = (link == Link::sensing) ? 1 : 2;
    for (std::size_t s = 0; s < snr_grid_db.size(); ++s) {
        const double snr = snr_grid_db[s];
        for (int q = 0; q < Q; ++q) {
            Rng rng = base.derive(link_salt, s + 1, static_cast<std::uint64_t>(q) + 1);
            if (link == Link::sensing) {
                const SensingChannel ch = draw_sensing_channel(cfg, rng);
                const double sigma2 = noise_variance_from_snr(ch.A, snr);
                for (int v = 1; v <= V; ++v) {
                    ReceivedBS rx = synthesize_bs_rx(ch.A, si.S, X.X, v == 1 ? 0.0 : sigma2,
                                                     rng, cfg.C());
                    rx.snr_db = snr;
                    SamplePair p = build_sensing_pair(ch.A, compensate_si(rx, si.S, X.X));
                    p.q = q;
                    p.v = v;
                    ds.pairs.push_back(std::move(p));
                }
            } else {
                const CommChannels ch = draw_comm_channels(cfg, rng);
                const MatrixXcd& G = ch.G[static_cast<std::size_t>(user_k)];
                const double sigma2 = noise_variance_from_snr(G, snr);
                for (int v = 1; v <= V; ++v) {
                    ReceivedUE rx = synthesize_ue_rx(G, Theta.Theta, X.X, v == 1 ? 0.0 : sigma2, rng);
                    rx.snr_db = snr;
                    rx.k = user_k;
                    SamplePair p = build_comm_pair(G, rx);
                    p.q = q;
                    p.v = v;
                    ds.pairs.push_back(std::move(p));
                }
            }
        }
    }
    return ds;
}

/// Per-sample standardization with population statistics.
inline std::pair<std::vector<double>, NormalizationRecord> standardize(const std::vector<double>& R) {
    if (R.empty()) throw std::invalid_argument("standardize: empty sample");
    const double n = static_cast<double>(R.size());
    const double mean = std::accumulate(R.begin(), R.end(), 0.0) / n;
    double var = 0.0;
    for (double x : R) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    if (sd <= 1e-12) throw std::invalid_argument("standardize: degenerate (near-constant) sample");
    std::vector<double> out(R.size());
    for (std::size_t i = 0; i < R.size(); ++i) out[i] = (R[i] - mean) / sd;
    return {std::move(out), {mean, sd}};
}

inline std::vector<double> scale_target(const std::vector<double>& O, double rho) {
    if (!(rho > 0)) throw std::invalid_argument("scale_target: rho must be > 0");
    std::vector<double> out(O.size());
    for (std::size_t i = 0; i < O.size(); ++i) out[i] = rho * O[i];
    return out;
}

/// Disjoint shuffled split; test size = round(n * test_fraction).
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
        throw std::invalid_argument("split: test_fraction must be in (0, 1)");
    std::vector<std::size_t> idx(ds.pairs.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(ds.pairs.size())));
    Dataset train, test;
    train.meta = ds.meta;
    test.meta = ds.meta;
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_test ? test : train).pairs.push_back(ds.pairs[idx[i]]);
    return {std::move(train), std::move(test)};
}

namespace detail {

inline std::string config_to_meta(const SystemConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << c.M << ' ' << c.N << ' ' << c.K << ' ' << c.spacing_ratio << ' ' << c.K1_H << ' '
       << c.K1_r << ' ' << c.pl_ref_dbm << ' ' << c.d_ref_m << ' ' << c.d1_m << ' ' << c.d2_m
       << ' ' << c.d3_m << ' ' << c.zeta1 << ' ' << c.zeta2 << ' ' << c.zeta3 << ' '
       << c.tx_power_dbm << ' ' << c.theta_target_rad << ' ' << c.theta_aod_rad << ' '
       << c.theta_aoa_rad << ' ' << c.si_gain << ' ' << c.rho << ' ' << c.seed;
    return os.str();
}

inline SystemConfig config_from_meta(const std::string& s) {
    std::istringstream is(s);
    SystemConfig c;
    is >> c.M >> c.N >> c.K >> c.spacing_ratio >> c.K1_H >> c.K1_r >> c.pl_ref_dbm >> c.d_ref_m >>
        c.d1_m >> c.d2_m >> c.d3_m >> c.zeta1 >> c.zeta2 >> c.zeta3 >> c.tx_power_dbm >>
        c.theta_target_rad >> c.theta_aod_rad >> c.theta_aoa_rad >> c.si_gain >> c.rho >> c.seed;
    if (!is) throw std::runtime_error("dataset: malformed config metadata");
    return c;
}

} // namespace detail

inline void save_dataset(const Dataset& ds, const std::string& path) {
    Container c;
    c.kind = "dataset";
    c.meta["config"] = detail::config_to_meta(ds.meta.config);
    c.meta["link"] = link_name(ds.meta.link);
    c.meta["Q"] = std::to_string(ds.meta.Q);
    c.meta["V"] = std::to_string(ds.meta.V);
    c.meta["user_k"] = std::to_string(ds.meta.user_k);
    c.meta["seed"] = std::to_string(ds.meta.seed);
    c.meta["count"] = std::to_string(ds.pairs.size());
    {
        std::ostringstream os;
        os.precision(17);
        for (std::size_t i = 0; i < ds.meta.snr_grid_db.size(); ++i)
            os << (i ? " " : "") << ds.meta.snr_grid_db[i];
        c.meta["snr_grid_db"] = os.str();
    }
    if (!ds.pairs.empty()) {
        c.meta["r_len"] = std::to_string(ds.pairs.front().R.size());
        c.meta["o_len"] = std::to_string(ds.pairs.front().O.size());
    } else {
        c.meta["r_len"] = "0";
        c.meta["o_len"] = "0";
    }
    for (const auto& p : ds.pairs) {
        c.payload.push_back(p.snr_db);
        c.payload.push_back(static_cast<double>(p.q));
        c.payload.push_back(static_cast<double>(p.v));
        c.payload.push_back(static_cast<double>(p.k));
        c.payload.insert(c.payload.end(), p.R.begin(), p.R.end());
        c.payload.insert(c.payload.end(), p.O.begin(), p.O.end());
    }
    save_container(path, c);
}

inline Dataset load_dataset(const std::string& path) {
    Container c = load_container(path);
    if (c.kind != "dataset") throw std::runtime_error("load_dataset: not a dataset file: " + path);
    Dataset ds;
    ds.meta.config = detail::config_from_meta(c.meta.at("config"));
    ds.meta.link = link_from_name(c.meta.at("link"));
    ds.meta.Q = std::stoi(c.meta.at("Q"));
    ds.meta.V = std::stoi(c.meta.at("V"));
    ds.meta.user_k = std::stoi(c.meta.at("user_k"));
    ds.meta.seed = std::stoull(c.meta.at("seed"));
    {
        std::istringstream is(c.meta.at("snr_grid_db"));
        double x;
        while (is >> x) ds.meta.snr_grid_db.push_back(x);
    }
    const std::size_t count = std::stoull(c.meta.at("count"));
    const std::size_t r_len = std::stoull(c.meta.at("r_len"));
    const std::size_t o_len = std::stoull(c.meta.at("o_len"));
    const std::size_t stride = 4 + r_len + o_len;
    if (c.payload.size() != count * stride)
        throw std::runtime_error("load_dataset: payload size mismatch in " + path);
    ds.pairs.resize(count);
    std::size_t off = 0;
    for (auto& p : ds.pairs) {
        p.link = ds.meta.link;
        p.snr_db = c.payload[off++];
        p.q = static_cast<int>(c.payload[off++]);
        p.v = static_cast<int>(c.payload[off++]);
        p.k = static_cast<int>(c.payload[off++]);
        p.R.assign(c.payload.begin() + off, c.payload.begin() + off + r_len);
        off += r_len;
        p.O.assign(c.payload.begin() + off, c.payload.begin() + off + o_len);
        off += o_len;
    }
    return ds;
}

} // namespace risce
