#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "risce/commands.hpp"

using namespace risce;

namespace {

std::string write_config(const char* name, const std::string& body) {
    const std::string path = std::string("cli_test_") + name + ".cfg";
    std::ofstream f(path);
    f << body;
    return path;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("config files parse key=value lines with comments and defaults") {
    const std::string path = write_config("good", R"(# experiment settings
M = 2
N = 8
Q=5           # inline comment
train_snr_db = 0,10
link = communication
profile = paper
)");
    const RunConfig cfg = parse_config(path);
    CHECK(cfg.sys.M == 2);
    CHECK(cfg.sys.N == 8);
    CHECK(cfg.Q == 1000); // profile=paper overrides the earlier Q line
    CHECK(cfg.V == 10);
    CHECK(cfg.link == Link::communication);
    CHECK(cfg.train_snr_db == std::vector<double>{0.0, 10.0});
    CHECK(cfg.test_snr_db.size() == 17); // untouched default grid
    std::remove(path.c_str());
}

TEST_CASE("unknown keys are rejected with the key named") {
    const std::string path = write_config("badkey", "emitter_gain=3\n");
    CHECK_THROWS_WITH_AS(parse_config(path), doctest::Contains("emitter_gain"),
                         std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("malformed values are rejected with the key named") {
    CHECK_THROWS_WITH_AS(
        [] {
            RunConfig cfg;
            apply_override(cfg, "epochs", "many");
        }(),
        doctest::Contains("epochs"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        [] {
            RunConfig cfg;
            apply_override(cfg, "train_snr_db", "1,two,3");
        }(),
        doctest::Contains("train_snr_db"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        [] {
            RunConfig cfg;
            apply_override(cfg, "Q", "0");
        }(),
        doctest::Contains("Q"), std::invalid_argument);
}

TEST_CASE("validation names the offending key") {
    RunConfig cfg;
    cfg.test_fraction = 1.5;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("test_fraction"),
                         std::invalid_argument);
    RunConfig cfg2;
    cfg2.user_k = 99;
    CHECK_THROWS_WITH_AS(cfg2.validate(), doctest::Contains("user_k"), std::invalid_argument);
}

TEST_CASE("profiles set the documented workloads") {
    RunConfig cfg;
    cfg.apply_profile("desk");
    CHECK(cfg.Q == 200);
    CHECK(cfg.V == 5);
    cfg.apply_profile("paper");
    CHECK(cfg.Q == 1000);
    CHECK(cfg.V == 10);
    CHECK_THROWS_AS(cfg.apply_profile("quick"), std::invalid_argument);
}

TEST_CASE("config hash tracks training-relevant fields only") {
    RunConfig a, b;
    CHECK(a.config_hash() == b.config_hash());
    b.trials = a.trials + 50; // evaluation-only knob
    b.test_snr_db = {0.0};
    b.out_dir = "elsewhere";
    CHECK(a.config_hash() == b.config_hash());
    RunConfig c;
    c.sys.M = a.sys.M + 1;
    CHECK(a.config_hash() != c.config_hash());
    RunConfig d;
    d.epochs = a.epochs + 1;
    CHECK(a.config_hash() != d.config_hash());
    RunConfig e;
    e.train_snr_db = {10.0};
    CHECK(a.config_hash() != e.config_hash());
}

TEST_CASE("end-to-end CLI run is deterministic and rejects bad arguments") {
    const char* cli = std::getenv("RISCE_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "RISCE_CLI must point at the command-line binary");
    const std::string base = std::string(cli) +
                             " --out . --set experiment_id=cli_det --set M=2 --set N=6"
                             " --set Q=4 --set V=2 --set train_snr_db=10 --set epochs=2"
                             " --set trials=5 --set test_snr_db=-5,10";
    auto run = [&](const std::string& verb) {
        const std::string cmd = std::string(cli) + " " + verb +
                                " --out . --set experiment_id=cli_det --set M=2 --set N=6"
                                " --set Q=4 --set V=2 --set train_snr_db=10 --set epochs=2"
                                " --set trials=5 --set test_snr_db=-5,10 > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    (void)base;
    REQUIRE(run("generate") == 0);
    REQUIRE(run("train") == 0);
    REQUIRE(run("evaluate") == 0);
    const std::string first = read_file("cli_det_nmse_sensing.csv");
    REQUIRE_FALSE(first.empty());
    REQUIRE(run("evaluate") == 0);
    CHECK(read_file("cli_det_nmse_sensing.csv") == first);

    // Unknown --set key fails with a nonzero exit.
    const std::string bad = std::string(cli) + " generate --out . --set bogus_key=1 > /dev/null 2>&1";
    CHECK(std::system(bad.c_str()) != 0);
    // Unknown subcommand fails.
    const std::string badverb = std::string(cli) + " frobnicate > /dev/null 2>&1";
    CHECK(std::system(badverb.c_str()) != 0);

    for (const char* f :
         {"cli_det_dataset_sensing.bin", "cli_det_cgan_sensing.bin", "cli_det_ffn_sensing.bin",
          "cli_det_elm_sensing.bin", "cli_det_nmse_sensing.csv"})
        std::remove(f);
}

TEST_CASE("evaluate refuses checkpoints trained under a different config") {
    RunConfig cfg;
    cfg.sys.M = 2;
    cfg.sys.N = 6;
    cfg.Q = 3;
    cfg.V = 2;
    cfg.train_snr_db = {10.0};
    cfg.epochs = 1;
    cfg.trials = 2;
    cfg.test_snr_db = {10.0};
    cfg.experiment_id = "hashchk";
    cfg.out_dir = ".";
    cmd_generate(cfg);
    cmd_train(cfg);
    RunConfig other = cfg;
    other.epochs = 2; // training-relevant change, same artifact paths
    CHECK_THROWS_WITH_AS(cmd_evaluate(other), doctest::Contains("hash"), std::runtime_error);
    // The matching config still evaluates.
    const std::string csv = cmd_evaluate(cfg);
    CHECK_FALSE(read_file(csv).empty());
    for (const char* f :
         {"hashchk_dataset_sensing.bin", "hashchk_cgan_sensing.bin", "hashchk_ffn_sensing.bin",
          "hashchk_elm_sensing.bin", "hashchk_nmse_sensing.csv"})
        std::remove(f);
}

TEST_CASE("missing upstream artifacts produce readable errors") {
    RunConfig cfg;
    cfg.experiment_id = "missing_everything";
    cfg.out_dir = ".";
    CHECK_THROWS_AS(cmd_train(cfg), std::runtime_error);
    CHECK_THROWS_AS(cmd_evaluate(cfg), std::runtime_error);
}

TEST_CASE("sweep emits one row per value/SNR/method and matches evaluate at a single point") {
    RunConfig cfg;
    cfg.sys.M = 2;
    cfg.sys.N = 6;
    cfg.Q = 3;
    cfg.V = 2;
    cfg.train_snr_db = {10.0};
    cfg.epochs = 1;
    cfg.trials = 3;
    cfg.test_snr_db = {10.0};
    cfg.sweep_snr_db = {10.0};
    cfg.experiment_id = "sweepchk";
    cfg.out_dir = ".";
    CHECK_THROWS_AS(cmd_sweep(cfg, "K", {2}), std::invalid_argument);

    auto data_rows = [](const std::string& text) {
        std::vector<std::vector<std::string>> rows;
        std::istringstream in(text);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> cells;
            std::istringstream cs(line);
            std::string cell;
            while (std::getline(cs, cell, ',')) cells.push_back(cell);
            rows.push_back(cells);
        }
        return rows;
    };

    const auto sweep = data_rows(read_file(cmd_sweep(cfg, "M", {2, 3})));
    CHECK(sweep.size() == 2u * 1u * 4u); // values x sweep SNRs x methods
    std::set<std::string> methods;
    for (const auto& row : sweep) methods.insert(row[2]);
    CHECK(methods == std::set<std::string>{"ELM", "FFN", "LS", "SE-CGAN"});

    // A single-value sweep reproduces the Monte-Carlo rows of evaluate.
    cmd_generate(cfg);
    cmd_train(cfg);
    const auto eval_rows = data_rows(read_file(cmd_evaluate(cfg)));
    std::map<std::string, std::string> mc_nmse;
    for (const auto& row : eval_rows)
        if (row[0] == "mc") mc_nmse[row[2]] = row[3];
    for (const auto& row : sweep)
        if (row[0] == "2") CHECK(row[3] == mc_nmse.at(row[2]));

    for (const char* f :
         {"sweepchk_dataset_sensing.bin", "sweepchk_cgan_sensing.bin", "sweepchk_ffn_sensing.bin",
          "sweepchk_elm_sensing.bin", "sweepchk_nmse_sensing.csv", "sweepchk_sweep_M_sensing.csv"})
        std::remove(f);
}
