#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "heston/cli.hpp"
#include "heston/pde.hpp"

int main(int argc, char** argv) {
    CLI::App app{"American put pricing and verification under Heston dynamics"};
    std::string config_path;
    std::string out_override;
    int threads_override = -1;
    std::int64_t seed_override = -1;
    bool print_defaults = false;
    app.add_option("-c,--config", config_path, "Run configuration JSON file");
    app.add_option("-o,--out", out_override, "Override the output directory");
    app.add_option("-t,--threads", threads_override, "Override the thread count");
    app.add_option("-s,--seed", seed_override, "Override the Monte Carlo seed");
    app.add_flag("--print-defaults", print_defaults,
                 "Print the fully resolved default configuration and exit");
    CLI11_PARSE(app, argc, argv);

    if (print_defaults) {
        std::cout << heston::default_config_json().dump(2) << '\n';
        return 0;
    }

    try {
        if (config_path.empty())
            throw heston::ConfigError("a config file is required (see --help)");
        std::ifstream file(config_path, std::ios::binary);
        if (!file)
            throw heston::ConfigError("cannot read config file: " + config_path);
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(file);
        } catch (const nlohmann::json::parse_error& err) {
            throw heston::ConfigError(std::string("config is not valid JSON: ") +
                                      err.what());
        }
        heston::RunConfig cfg = heston::parse_run_config(parsed);
        if (!out_override.empty()) cfg.output_dir = out_override;
        if (threads_override >= 0) cfg.threads = threads_override;
        if (seed_override >= 0)
            cfg.mc.seed = static_cast<std::uint64_t>(seed_override);
        return heston::run_command(cfg, std::cout);
    } catch (const heston::ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return 2;
    } catch (const heston::SolverError& err) {
        std::cerr << "solver error: " << err.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    }
}
