#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "risce/baselines.hpp"
#include "risce/cgan.hpp"
#include "risce/complexity.hpp"
#include "risce/csv.hpp"
#include "risce/runconfig.hpp"

namespace risce {

inline constexpr const char* kArtifactVersion = "risce-0.1.0";

// --- output paths ------------------------------------------------------------

inline std::string dataset_path(const RunConfig& c) {
    return c.out_dir + "/" + c.experiment_id + "_dataset_" + link_name(c.link) + ".bin";
}
inline std::string model_path(const RunConfig& c) {
    return c.out_dir + "/" + c.experiment_id + "_cgan_" + link_name(c.link) + ".bin";
}
inline std::string ffn_path(const RunConfig& c) {
    return c.out_dir + "/" + c.experiment_id + "_ffn_" + link_name(c.link) + ".bin";
}
inline std::string elm_path(const RunConfig& c) {
    return c.out_dir + "/" + c.experiment_id + "_elm_" + link_name(c.link) + ".bin";
}
inline std::string nmse_csv_path(const RunConfig& c) {
    return c.out_dir + "/" + c.experiment_id + "_nmse_" + link_name(c.link) + ".csv";
}
inline std::string complexity_csv_path(const RunConfig& c) {
    return c.out_dir + "/" + c.experiment_id + "_complexity.csv";
}
inline std::string sweep_csv_path(const RunConfig& c, const std::string& variable) {
    return c.out_dir + "/" + c.experiment_id + "_sweep_" + variable + "_" + link_name(c.link) + ".csv";
}

// --- regression checkpoints --------------------------------------------------

inline void save_regression(const RegressionModel& m, const std::string& method,
                            const std::string& path, const std::string& config_hash) {
    Container c;
    c.kind = "regression";
    c.meta["method"] = method;
    c.meta["link"] = link_name(m.link);
    {
        std::ostringstream os;
        os.precision(17);
        os << m.rho;
        c.meta["rho"] = os.str();
    }
    c.meta["config"] = detail::config_to_meta(m.config);
    c.meta["spec"] = spec_to_string(m.spec);
    c.meta["config_hash"] = config_hash;
    append_params_payload(m.params, c.payload);
    save_container(path, c);
}

inline RegressionModel load_regression(const std::string& path) {
    Container c = load_container(path);
    if (c.kind != "regression") throw std::runtime_error("load_regression: not a regression checkpoint: " + path);
    RegressionModel m;
    m.link = link_from_name(c.meta.at("link"));
    m.rho = std::stod(c.meta.at("rho"));
    m.config = detail::config_from_meta(c.meta.at("config"));
    m.spec = spec_from_string(c.meta.at("spec"));
    const std::size_t off = read_params_payload(m.spec, c.payload, 0, m.params);
    if (off != c.payload.size()) throw std::runtime_error("load_regression: trailing payload in " + path);
    return m;
}

// --- evaluation core ---------------------------------------------------------

namespace detail {

inline MatrixXcd unflatten_half_complex(const std::vector<double>& v, int rows, int cols) {
    const int nel = rows * cols;
    if (static_cast<int>(v.size()) != 2 * nel)
        throw std::invalid_argument("unflatten: length mismatch");
    MatrixXcd m(rows, cols);
    for (int i = 0; i < nel; ++i)
        m.data()[i] = cd(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(nel + i)]);
    return m;
}

// Inverse of the communication input stacking: [Re sub-frame-major; Im] -> C x P.
inline MatrixXcd unflatten_comm_rx(const std::vector<double>& v, int C, int P) {
    const int n = C * P;
    if (static_cast<int>(v.size()) != 2 * n)
        throw std::invalid_argument("unflatten_comm_rx: length mismatch");
    MatrixXcd m(C, P);
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < P; ++p)
            m(c, p) = cd(v[static_cast<std::size_t>(c * P + p)], v[static_cast<std::size_t>(n + c * P + p)]);
    return m;
}

} // namespace detail

struct EvalModels {
    const CganModel* cgan = nullptr;
    const RegressionModel* ffn = nullptr;
    const RegressionModel* elm = nullptr;
};

inline std::string cgan_method_name(Link l) { return l == Link::sensing ? "SE-CGAN" : "CE-CGAN"; }

/// Per-method Monte-Carlo NMSE at one operating SNR over fresh channel and
/// noise draws. Deterministic given the config seed.
inline std::map<std::string, double> eval_point_mc(const RunConfig& cfg, const EvalModels& models,
                                                   double snr_db, int trials) {
    const PilotMatrix X = build_pilot_matrix(cfg.sys.M, cfg.sys.P(), cfg.sys.tx_power_linear());
    const PhaseMatrix Theta = build_phase_matrix(cfg.sys.N, cfg.sys.C());
    Rng si_rng = Rng(cfg.sys.seed).derive(0x51, 0xfade);
    const SelfInterferenceChannel si = draw_si_channel(cfg.sys, si_rng);
    // Common random numbers: trial streams are shared across operating SNRs so
    // sweep curves are smooth rather than jittered by per-point sampling noise.
    const Rng base = Rng(cfg.sys.seed).derive(0xe7a1);

    std::map<std::string, double> acc;
    for (int t = 0; t < trials; ++t) {
        Rng rng = base.derive(static_cast<std::uint64_t>(t) + 1);
        if (cfg.link == Link::sensing) {
            const SensingChannel ch = draw_sensing_channel(cfg.sys, rng);
            const double sigma2 = noise_variance_from_snr(ch.A, snr_db);
            ReceivedBS rx = synthesize_bs_rx(ch.A, si.S, X.X, sigma2, rng, cfg.sys.C());
            const ReceivedBS comp = compensate_si(rx, si.S, X.X);
            const SamplePair pair = build_sensing_pair(ch.A, comp);
            MatrixXcd y_avg = comp.Y.front();
            for (std::size_t c = 1; c < comp.Y.size(); ++c) y_avg += comp.Y[c];
            y_avg /= static_cast<double>(comp.Y.size());
            acc["LS"] += nmse(ls_sensing(y_avg, X), ch.A);
            if (models.cgan) acc[cgan_method_name(cfg.link)] += nmse(estimate(*models.cgan, pair.R), ch.A);
            if (models.ffn) acc["FFN"] += nmse(estimate_regression(*models.ffn, pair.R), ch.A);
            if (models.elm) acc["ELM"] += nmse(estimate_regression(*models.elm, pair.R), ch.A);
        } else {
            const CommChannels ch = draw_comm_channels(cfg.sys, rng);
            const MatrixXcd& G = ch.G[static_cast<std::size_t>(cfg.user_k)];
            const double sigma2 = noise_variance_from_snr(G, snr_db);
            ReceivedUE rx = synthesize_ue_rx(G, Theta.Theta, X.X, sigma2, rng);
            rx.k = cfg.user_k;
            const SamplePair pair = build_comm_pair(G, rx);
            acc["LS"] += nmse(ls_comm(rx.Y, Theta, X), G);
            if (models.cgan) acc[cgan_method_name(cfg.link)] += nmse(estimate(*models.cgan, pair.R), G);
            if (models.ffn) acc["FFN"] += nmse(estimate_regression(*models.ffn, pair.R), G);
            if (models.elm) acc["ELM"] += nmse(estimate_regression(*models.elm, pair.R), G);
        }
    }
    for (auto& [k, v] : acc) v /= static_cast<double>(trials);
    return acc;
}

/// NMSE of each learned method on held-out dataset pairs, grouped by pair SNR.
inline std::map<std::pair<double, std::string>, double>
eval_test_split(const RunConfig& cfg, const EvalModels& models, const Dataset& test_ds) {
    const PilotMatrix X = build_pilot_matrix(cfg.sys.M, cfg.sys.P(), cfg.sys.tx_power_linear());
    const PhaseMatrix Theta = build_phase_matrix(cfg.sys.N, cfg.sys.C());
    std::map<std::pair<double, std::string>, double> sums;
    std::map<double, int> counts;
    for (const auto& pair : test_ds.pairs) {
        const MatrixXcd truth = detail::unflatten_half_complex(
            pair.O, cfg.sys.M, cfg.link == Link::sensing ? cfg.sys.M : cfg.sys.N);
        counts[pair.snr_db] += 1;
        if (cfg.link == Link::sensing) {
            const MatrixXcd y_avg = detail::unflatten_half_complex(pair.R, cfg.sys.M, cfg.sys.P());
            sums[{pair.snr_db, "LS"}] += nmse(ls_sensing(y_avg, X), truth);
        } else {
            const MatrixXcd y = detail::unflatten_comm_rx(pair.R, cfg.sys.C(), cfg.sys.P());
            sums[{pair.snr_db, "LS"}] += nmse(ls_comm(y, Theta, X), truth);
        }
        if (models.cgan)
            sums[{pair.snr_db, cgan_method_name(cfg.link)}] += nmse(estimate(*models.cgan, pair.R), truth);
        if (models.ffn)
            sums[{pair.snr_db, "FFN"}] += nmse(estimate_regression(*models.ffn, pair.R), truth);
        if (models.elm)
            sums[{pair.snr_db, "ELM"}] += nmse(estimate_regression(*models.elm, pair.R), truth);
    }
    for (auto& [key, v] : sums) v /= static_cast<double>(counts.at(key.first));
    return sums;
}

// --- commands ----------------------------------------------------------------

inline std::string cmd_generate(const RunConfig& cfg) {
    cfg.validate();
    Dataset ds = generate_dataset(cfg.sys, cfg.train_snr_db, cfg.Q, cfg.V, cfg.link,
                                  cfg.sys.seed, cfg.user_k);
    const std::string path = dataset_path(cfg);
    save_dataset(ds, path);
    return path;
}

struct TrainedArtifacts {
    std::string cgan_file, ffn_file, elm_file;
};

inline TrainedArtifacts cmd_train(const RunConfig& cfg) {
    cfg.validate();
    Dataset ds = load_dataset(dataset_path(cfg));
    auto [train_ds, test_ds] = split(ds, cfg.test_fraction, Rng(cfg.sys.seed).derive(0x5b11).seed());
    (void)test_ds;

    CganModel model = (cfg.link == Link::sensing) ? build_se_cgan(cfg.sys, cfg.sys.seed)
                                                  : build_ce_cgan(cfg.sys, cfg.sys.seed);
    TrainConfig tc;
    tc.batch_size = cfg.batch_size;
    tc.alpha = cfg.alpha;
    tc.lr_generator = cfg.lr_generator;
    tc.lr_discriminator = cfg.lr_discriminator;
    tc.epochs = cfg.epochs;
    tc.seed = cfg.sys.seed;
    train(model, train_ds, tc);

    RegressionTrainConfig rc;
    rc.batch_size = cfg.batch_size;
    rc.lr = cfg.lr_generator;
    rc.epochs = cfg.epochs;
    rc.seed = cfg.sys.seed;
    const RegressionModel ffn = ffn_baseline(train_ds, rc);
    const RegressionModel elm = elm_baseline(train_ds, cfg.sys.seed);

    TrainedArtifacts out;
    out.cgan_file = model_path(cfg);
    out.ffn_file = ffn_path(cfg);
    out.elm_file = elm_path(cfg);
    const std::string hash = cfg.config_hash();
    save_model(model, out.cgan_file, hash);
    save_regression(ffn, "FFN", out.ffn_file, hash);
    save_regression(elm, "ELM", out.elm_file, hash);
    return out;
}

namespace detail {

inline void check_hash(const std::string& stored, const RunConfig& cfg, const std::string& path) {
    if (!stored.empty() && stored != cfg.config_hash())
        throw std::runtime_error("config hash mismatch between checkpoint " + path +
                                 " and evaluation config");
}

} // namespace detail

inline std::string cmd_evaluate(const RunConfig& cfg) {
    cfg.validate();
    Dataset ds = load_dataset(dataset_path(cfg));
    auto [train_ds, test_ds] = split(ds, cfg.test_fraction, Rng(cfg.sys.seed).derive(0x5b11).seed());
    (void)train_ds;

    const CganModel cgan = load_model(model_path(cfg));
    detail::check_hash(model_config_hash(model_path(cfg)), cfg, model_path(cfg));
    const RegressionModel ffn = load_regression(ffn_path(cfg));
    const RegressionModel elm = load_regression(elm_path(cfg));
    EvalModels models{&cgan, &ffn, &elm};

    CsvReport report;
    report.header = {"source", "snr_db", "method", "nmse", "nmse_db"};
    std::map<std::string, double> method_sum;
    std::map<std::string, int> method_count;
    for (double snr : cfg.test_snr_db) {
        const auto point = eval_point_mc(cfg, models, snr, cfg.trials);
        for (const auto& [method, value] : point) {
            report.add_row({"mc", fmt_double(snr), method, fmt_double(value),
                            fmt_double(10.0 * std::log10(value))});
            method_sum[method] += value;
            method_count[method] += 1;
        }
    }
    const auto split_rows = eval_test_split(cfg, models, test_ds);
    for (const auto& [key, value] : split_rows)
        report.add_row({"split", fmt_double(key.first), key.second, fmt_double(value),
                        fmt_double(10.0 * std::log10(value))});

    report.footer.push_back(std::string("seed=") + std::to_string(cfg.sys.seed));
    report.footer.push_back("config_hash=" + cfg.config_hash());
    report.footer.push_back(std::string("artifact_version=") + kArtifactVersion);
    for (const auto& [method, sum] : method_sum)
        report.footer.push_back("mean_mc_nmse_" + method + "=" +
                                fmt_double(sum / method_count.at(method)));
    const std::string path = nmse_csv_path(cfg);
    save_csv(report, path);
    return path;
}

inline std::string cmd_complexity(const RunConfig& cfg) {
    cfg.validate();
    const int M = cfg.sys.M, N = cfg.sys.N;
    const ComplexitySplit se = complexity_se(M);
    const ComplexitySplit ce = complexity_ce(cfg.sys.C(), cfg.sys.P(), M, N);

    const CganModel se_model = build_se_cgan(cfg.sys, cfg.sys.seed);
    const auto se_gen_count = count_operations(
        fold_batchnorm(se_model.gen_spec, se_model.gen_params).first);
    const auto se_disc_count = count_operations(
        fold_batchnorm(se_model.disc_spec, se_model.disc_params).first);

    const CganModel ce_model = build_ce_cgan(cfg.sys, cfg.sys.seed);
    const auto ce_gen_count = count_operations(
        fold_batchnorm(ce_model.gen_spec, ce_model.gen_params).first);
    const auto ce_disc_count = count_operations(
        fold_batchnorm(ce_model.disc_spec, ce_model.disc_params).first);

    const OpCounts bench_se = ffn_complexity(2 * M * cfg.sys.P(), 2 * M * M);
    const OpCounts bench_ce = ffn_complexity(2 * cfg.sys.C() * cfg.sys.P(), 2 * M * N);
    const Reduction red_se = reduction(bench_se, se.total);
    const Reduction red_ce = reduction(bench_ce, ce.total);

    CsvReport report;
    report.header = {"network", "metric", "closed_form", "counted", "ffn_benchmark", "reduction"};
    auto row = [&report](const std::string& net, const std::string& metric, std::int64_t closed,
                         std::int64_t counted, std::int64_t bench, double red) {
        report.add_row({net, metric, std::to_string(closed), std::to_string(counted),
                        std::to_string(bench), fmt_double(red)});
    };
    row("SE-CGAN", "additions", se.total.adds, se_gen_count.first + se_disc_count.first,
        bench_se.adds, red_se.adds);
    row("SE-CGAN", "multiplications", se.total.mults, se_gen_count.second + se_disc_count.second,
        bench_se.mults, red_se.mults);
    row("CE-CGAN", "additions", ce.total.adds, ce_gen_count.first + ce_disc_count.first,
        bench_ce.adds, red_ce.adds);
    row("CE-CGAN", "multiplications", ce.total.mults, ce_gen_count.second + ce_disc_count.second,
        bench_ce.mults, red_ce.mults);
    report.footer.push_back(std::string("seed=") + std::to_string(cfg.sys.seed));
    report.footer.push_back("config_hash=" + cfg.config_hash());
    report.footer.push_back(std::string("artifact_version=") + kArtifactVersion);
    const std::string path = complexity_csv_path(cfg);
    save_csv(report, path);
    return path;
}

/// Retrain-and-evaluate sweep over M or N at the sweep SNR levels.
inline std::string cmd_sweep(const RunConfig& base_cfg, const std::string& variable,
                             const std::vector<int>& values) {
    base_cfg.validate();
    if (variable != "M" && variable != "N")
        throw std::invalid_argument("cmd_sweep: variable must be M or N");
    CsvReport report;
    report.header = {"sweep_value", "snr_db", "method", "nmse", "nmse_db"};
    for (int value : values) {
        RunConfig cfg = base_cfg;
        if (variable == "M") cfg.sys.M = value;
        else cfg.sys.N = value;
        cfg.validate();
        Dataset ds = generate_dataset(cfg.sys, cfg.train_snr_db, cfg.Q, cfg.V, cfg.link,
                                      cfg.sys.seed, cfg.user_k);
        auto [train_ds, test_ds] = split(ds, cfg.test_fraction, Rng(cfg.sys.seed).derive(0x5b11).seed());
        (void)test_ds;
        CganModel model = (cfg.link == Link::sensing) ? build_se_cgan(cfg.sys, cfg.sys.seed)
                                                      : build_ce_cgan(cfg.sys, cfg.sys.seed);
        TrainConfig tc;
        tc.batch_size = cfg.batch_size;
        tc.alpha = cfg.alpha;
        tc.lr_generator = cfg.lr_generator;
        tc.lr_discriminator = cfg.lr_discriminator;
        tc.epochs = cfg.epochs;
        tc.seed = cfg.sys.seed;
        train(model, train_ds, tc);
        RegressionTrainConfig rc;
        rc.batch_size = cfg.batch_size;
        rc.lr = cfg.lr_generator;
        rc.epochs = cfg.epochs;
        rc.seed = cfg.sys.seed;
        const RegressionModel ffn = ffn_baseline(train_ds, rc);
        const RegressionModel elm = elm_baseline(train_ds, cfg.sys.seed);
        EvalModels models{&model, &ffn, &elm};
        for (double snr : cfg.sweep_snr_db) {
            const auto point = eval_point_mc(cfg, models, snr, cfg.trials);
            for (const auto& [method, v] : point)
                report.add_row({std::to_string(value), fmt_double(snr), method, fmt_double(v),
                                fmt_double(10.0 * std::log10(v))});
        }
    }
    report.footer.push_back(std::string("seed=") + std::to_string(base_cfg.sys.seed));
    report.footer.push_back("config_hash=" + base_cfg.config_hash());
    report.footer.push_back(std::string("artifact_version=") + kArtifactVersion);
    const std::string path = sweep_csv_path(base_cfg, variable);
    save_csv(report, path);
    return path;
}

} // namespace risce
