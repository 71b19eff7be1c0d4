#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "arnqs/error.hpp"
#include "arnqs/parallel.hpp"
#include "arnqs/run.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kCompute = 2, kCheck = 3 };

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw arnqs::ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Options {
    std::string config;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::size_t workers = arnqs::default_workers();
};

int run(const std::string& subcommand, const Options& opt, const std::optional<std::string>& check)
{
    arnqs::RunConfig cfg;
    try {
        if (opt.config.empty()) {
            if (subcommand != "check") throw arnqs::ConfigError("--config is required for " + subcommand);
            cfg = arnqs::parse_config(R"({"subcommand": "check"})");
        } else {
            cfg = arnqs::parse_config(read_file(opt.config));
        }
        if (std::string(arnqs::to_string(cfg.subcommand)) != subcommand)
            throw arnqs::ConfigError("config.subcommand: \"" + std::string(arnqs::to_string(cfg.subcommand)) +
                                     "\" does not match the command line subcommand " + subcommand);
        if (check) cfg.check = *check;
        if (!opt.output.empty()) cfg.output_dir = opt.output;
        if (opt.seed) cfg.base_seed = *opt.seed;
        if (opt.workers < 1) throw arnqs::ConfigError("--workers must be >= 1");
        arnqs::validate(cfg);
    } catch (const arnqs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    }
    try {
        const auto outcome = arnqs::execute(cfg, opt.workers, std::cerr);
        std::cout << outcome.summary;
        return outcome.exit_code();
    } catch (const arnqs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "compute error: " << e.what() << '\n';
        return kCompute;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Ensembles of random autoregressive neural quantum states"};
    app.footer("Exit codes: 0 success, 1 config error, 2 compute error, 3 internal check failed.\n\n" +
               arnqs::csv_schema_help());
    app.require_subcommand(1);

    Options opt;
    std::uint64_t seed = 0;
    std::string check_name;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", opt.config, "JSON run configuration");
        if (config_required) c->required()->check(CLI::ExistingFile);
        sub->add_option("--output", opt.output, "output directory (overrides the config)");
        sub->add_option("--seed", seed, "base seed (overrides the config)");
        sub->add_option("--workers", opt.workers, "worker threads")->capture_default_str();
    };

    for (const char* name : {"phase-diagram", "scaling", "level-stats", "correlations", "vmc-sweep"}) {
        auto* sub = app.add_subcommand(name, std::string("run the ") + name + " study");
        add_common(sub, true);
    }
    auto* check = app.add_subcommand("check", "run a validation suite and write its report");
    check->add_option("suite", check_name, "suite name")->required()->check(CLI::IsMember({"appendix-b"}));
    add_common(check, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed") > 0) opt.seed = seed;
        return run(sub->get_name(), opt, sub->get_name() == "check" ? std::optional<std::string>(check_name)
                                                                     : std::nullopt);
    }
    return kConfig;
}
