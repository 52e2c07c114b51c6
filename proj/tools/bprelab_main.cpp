#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bprelab/runner.hpp"

namespace {

struct SubCmd {
    const char* name;
    const char* help;
};

constexpr SubCmd kCommands[] = {
    {"classify", "criticality and moment-condition report for an environment"},
    {"simulate", "population replicas and martingale sample moments"},
    {"charfn", "characteristic function grid plus the bound battery"},
    {"density", "density reconstruction by Fourier inversion and kernel estimate"},
    {"bernoulli", "self-similar smoothing measure diagnostics"},
    {"verify", "internal consistency checks; nonzero exit on failure"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quenched branching-process laboratory"};
    app.require_subcommand(1);

    std::string config_file;
    std::uint64_t seed = 0;
    std::string out;
    int threads = 0;
    std::vector<std::string> sets;

    for (const auto& cmd : kCommands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_file, "JSON configuration file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--out", out, "artifact output directory");
        sub->add_option("--threads", threads, "worker threads (0 = hardware)");
        sub->add_option("--set", sets, "numeric config override, key=value")
            ->take_all();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return bprelab::kExitConfig;
    }

    CLI::App* sub = app.get_subcommands().front();
    bprelab::CliOverrides over;
    if (sub->count("--seed")) over.seed = seed;
    if (sub->count("--out")) over.out = out;
    if (sub->count("--threads")) over.threads = threads;
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "config error: --set expects key=value, got \"" << kv << "\"\n";
            return bprelab::kExitConfig;
        }
        try {
            over.numeric.emplace_back(kv.substr(0, eq), std::stod(kv.substr(eq + 1)));
        } catch (const std::exception&) {
            std::cerr << "config error: --set value in \"" << kv << "\" is not a number\n";
            return bprelab::kExitConfig;
        }
    }

    return bprelab::run_command_guarded(sub->get_name(), config_file, over, std::cout,
                                        std::cerr);
}
