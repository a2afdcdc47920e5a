#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "risce/commands.hpp"

namespace {

struct Cli {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string profile;
    std::string out_dir;
    std::string link;
    std::vector<std::string> overrides;
};

risce::RunConfig resolve(const Cli& cli) {
    risce::RunConfig cfg;
    if (!cli.config_path.empty()) cfg = risce::parse_config(cli.config_path);
    if (!cli.profile.empty()) cfg.apply_profile(cli.profile);
    if (cli.seed_set) cfg.sys.seed = cli.seed;
    if (!cli.out_dir.empty()) cfg.out_dir = cli.out_dir;
    if (!cli.link.empty()) cfg.link = risce::link_from_name(cli.link);
    for (const auto& kv : cli.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        risce::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--config", cli.config_path, "key=value configuration file");
    cmd->add_option("--seed", cli.seed, "master RNG seed")->each([&cli](const std::string&) {
        cli.seed_set = true;
    });
    cmd->add_option("--profile", cli.profile, "desk or paper runtime profile")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--out", cli.out_dir, "output directory");
    cmd->add_option("--link", cli.link, "sensing or communication")
        ->check(CLI::IsMember({"sensing", "communication", "comm"}));
    cmd->add_option("--set", cli.overrides, "key=value override, repeatable");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RIS-assisted ISAC channel estimation toolkit"};
    app.require_subcommand(1);

    Cli cli;
    std::string sweep_variable = "M";
    std::vector<int> sweep_values;

    CLI::App* c_generate = app.add_subcommand("generate", "synthesize a training dataset");
    CLI::App* c_train = app.add_subcommand("train", "train the CGAN and baseline models");
    CLI::App* c_evaluate = app.add_subcommand("evaluate", "NMSE report over the test SNR grid");
    CLI::App* c_sweep = app.add_subcommand("sweep", "retrain and evaluate across M or N values");
    CLI::App* c_complexity = app.add_subcommand("complexity", "closed-form vs counted operation report");
    for (CLI::App* c : {c_generate, c_train, c_evaluate, c_sweep, c_complexity}) add_common(c, cli);
    c_sweep->add_option("--variable", sweep_variable, "swept dimension: M or N")
        ->check(CLI::IsMember({"M", "N"}));
    c_sweep->add_option("--values", sweep_values, "swept dimension values")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const risce::RunConfig cfg = resolve(cli);
        std::string path;
        if (c_generate->parsed()) path = risce::cmd_generate(cfg);
        else if (c_train->parsed()) {
            const auto files = risce::cmd_train(cfg);
            std::printf("wrote %s\nwrote %s\nwrote %s\n", files.cgan_file.c_str(),
                        files.ffn_file.c_str(), files.elm_file.c_str());
            return 0;
        } else if (c_evaluate->parsed()) path = risce::cmd_evaluate(cfg);
        else if (c_sweep->parsed()) path = risce::cmd_sweep(cfg, sweep_variable, sweep_values);
        else if (c_complexity->parsed()) path = risce::cmd_complexity(cfg);
        std::printf("wrote %s\n", path.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
