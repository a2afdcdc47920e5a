#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "risce/config.hpp"
#include "risce/dataset.hpp"
#include "risce/io.hpp"

namespace risce {

/// Full experiment configuration: the physical SystemConfig plus command
/// parameters. Loaded from a line-oriented key=value file with # comments.
struct RunConfig {
    SystemConfig sys;
    Link link = Link::sensing;
    int user_k = 0;

    std::string profile = "desk"; // desk | paper
    int Q = 200;
    int V = 5;
    std::vector<double> train_snr_db = {10.0, 15.0, 20.0};
    std::vector<double> test_snr_db;  // default -10:2.5:30
    std::vector<double> sweep_snr_db = {-5.0, 10.0};
    double test_fraction = 0.1;

    int epochs = 50;
    int batch_size = 16;
    double alpha = 100.0;
    double lr_generator = 2e-4;
    double lr_discriminator = 2e-5;

    int trials = 200; // Monte-Carlo trials per evaluation point
    std::string out_dir = ".";
    std::string experiment_id = "run";

    RunConfig() {
        for (int i = 0; i < 17; ++i) test_snr_db.push_back(-10.0 + 2.5 * i);
    }

    void apply_profile(const std::string& p) {
        if (p == "desk") {
            Q = 200;
            V = 5;
            epochs = 50;
        } else if (p == "paper") {
            Q = 1000;
            V = 10;
            epochs = 50;
        } else {
            throw std::invalid_argument("unknown profile: " + p);
        }
        profile = p;
    }

    void validate() const {
        sys.validate();
        auto fail = [](const std::string& key, const std::string& why) {
            throw std::invalid_argument("RunConfig: key '" + key + "' " + why);
        };
        if (Q < 1) fail("q", "must be >= 1");
        if (V < 1) fail("v", "must be >= 1");
        if (epochs < 0) fail("epochs", "must be >= 0");
        if (batch_size < 1) fail("batch_size", "must be >= 1");
        if (alpha < 0) fail("alpha", "must be >= 0");
        if (!(lr_generator > 0)) fail("lr_generator", "must be > 0");
        if (!(lr_discriminator > 0)) fail("lr_discriminator", "must be > 0");
        if (trials < 1) fail("trials", "must be >= 1");
        if (!(test_fraction > 0) || !(test_fraction < 1)) fail("test_fraction", "must be in (0,1)");
        if (train_snr_db.empty()) fail("train_snr_db", "must be nonempty");
        if (test_snr_db.empty()) fail("test_snr_db", "must be nonempty");
        if (user_k < 0 || user_k >= sys.K) fail("user_k", "must be in [0, K)");
    }

    /// Canonical text form of everything that shapes the dataset and the
    /// trained models; evaluation-only knobs (test grid, trials, paths) are
    /// deliberately outside the provenance hash.
    std::string canonical() const {
        std::ostringstream os;
        os.precision(17);
        os << detail::config_to_meta(sys) << '\n'
           << "link=" << link_name(link) << " user_k=" << user_k
           << " Q=" << Q << " V=" << V << " test_fraction=" << test_fraction
           << " epochs=" << epochs << " batch_size=" << batch_size << " alpha=" << alpha
           << " lr_g=" << lr_generator << " lr_d=" << lr_discriminator << '\n';
        os << "train_snr_db=";
        for (std::size_t i = 0; i < train_snr_db.size(); ++i)
            os << (i ? "," : "") << train_snr_db[i];
        os << '\n';
        return os.str();
    }

    std::string config_hash() const {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(fnv1a(canonical())));
        return hex;
    }
};

namespace detail {

inline std::vector<double> parse_grid(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw std::invalid_argument("RunConfig: key '" + key + "' has non-numeric entry: " + item);
        }
    }
    if (out.empty()) throw std::invalid_argument("RunConfig: key '" + key + "' is empty");
    return out;
}

} // namespace detail

/// Apply one key=value override. Throws naming the offending key.
inline void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto as_int = [&](int lo) {
        int x;
        try {
            x = std::stoi(value);
        } catch (const std::exception&) {
            throw std::invalid_argument("RunConfig: key '" + key + "' expects an integer, got: " + value);
        }
        if (x < lo)
            throw std::invalid_argument("RunConfig: key '" + key + "' must be >= " + std::to_string(lo));
        return x;
    };
    auto as_double = [&]() {
        try {
            return std::stod(value);
        } catch (const std::exception&) {
            throw std::invalid_argument("RunConfig: key '" + key + "' expects a number, got: " + value);
        }
    };
    if (key == "M") cfg.sys.M = as_int(1);
    else if (key == "N") cfg.sys.N = as_int(1);
    else if (key == "K") cfg.sys.K = as_int(1);
    else if (key == "spacing_ratio") cfg.sys.spacing_ratio = as_double();
    else if (key == "K1_H") cfg.sys.K1_H = as_double();
    else if (key == "K1_r") cfg.sys.K1_r = as_double();
    else if (key == "pl_ref_dbm") cfg.sys.pl_ref_dbm = as_double();
    else if (key == "d_ref_m") cfg.sys.d_ref_m = as_double();
    else if (key == "d1_m") cfg.sys.d1_m = as_double();
    else if (key == "d2_m") cfg.sys.d2_m = as_double();
    else if (key == "d3_m") cfg.sys.d3_m = as_double();
    else if (key == "zeta1") cfg.sys.zeta1 = as_double();
    else if (key == "zeta2") cfg.sys.zeta2 = as_double();
    else if (key == "zeta3") cfg.sys.zeta3 = as_double();
    else if (key == "tx_power_dbm") cfg.sys.tx_power_dbm = as_double();
    else if (key == "theta_target_rad") cfg.sys.theta_target_rad = as_double();
    else if (key == "theta_aod_rad") cfg.sys.theta_aod_rad = as_double();
    else if (key == "theta_aoa_rad") cfg.sys.theta_aoa_rad = as_double();
    else if (key == "si_gain") cfg.sys.si_gain = as_double();
    else if (key == "rho") cfg.sys.rho = as_double();
    else if (key == "seed") cfg.sys.seed = std::stoull(value);
    else if (key == "link") cfg.link = link_from_name(value);
    else if (key == "user_k") cfg.user_k = as_int(0);
    else if (key == "profile") cfg.apply_profile(value);
    else if (key == "Q") cfg.Q = as_int(1);
    else if (key == "V") cfg.V = as_int(1);
    else if (key == "epochs") cfg.epochs = as_int(0);
    else if (key == "batch_size") cfg.batch_size = as_int(1);
    else if (key == "alpha") cfg.alpha = as_double();
    else if (key == "lr_generator") cfg.lr_generator = as_double();
    else if (key == "lr_discriminator") cfg.lr_discriminator = as_double();
    else if (key == "trials") cfg.trials = as_int(1);
    else if (key == "test_fraction") cfg.test_fraction = as_double();
    else if (key == "train_snr_db") cfg.train_snr_db = detail::parse_grid(value, key);
    else if (key == "test_snr_db") cfg.test_snr_db = detail::parse_grid(value, key);
    else if (key == "sweep_snr_db") cfg.sweep_snr_db = detail::parse_grid(value, key);
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "experiment_id") cfg.experiment_id = value;
    else throw std::invalid_argument("RunConfig: unknown key '" + key + "'");
}

/// Parse a key=value config file; missing keys keep their defaults.
inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("parse_config: line " + std::to_string(lineno) +
                                        " is not key=value: " + line);
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        auto ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        auto vb = value.find_first_not_of(" \t");
        value = (vb == std::string::npos) ? "" : value.substr(vb);
        apply_override(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

} // namespace risce
