#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "bprelab/environment.hpp"

#include "json.hpp"

namespace bprelab {

inline constexpr int kFormatVersion = 1;

// Exit codes shared by the CLI and the runner layer.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRefusal = 3;
inline constexpr int kExitVerifyFailed = 4;

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
    // numeric overrides land as (key, value) pairs merged over the config
    std::vector<std::pair<std::string, double>> numeric;
};

//! Validated configuration for one command invocation.
//!
//! Holds the verbatim JSON plus typed accessors with per-command defaults.
//! The artifact echo excludes `threads` and `out`: both are performance or
//! placement knobs and must not break byte-identity of results.
class RunConfig {
public:
    static RunConfig from_file(const std::filesystem::path& file, const CliOverrides& over);
    static RunConfig from_json(nlohmann::json cfg, const CliOverrides& over);

    const EnvironmentProcess& environment() const;
    bool has_environment() const { return env_.has_value(); }
    std::uint64_t seed() const;

    double num(const std::string& key, double def) const;
    std::uint64_t uinteger(const std::string& key, std::uint64_t def) const;
    std::string str(const std::string& key, const std::string& def) const;
    bool flag(const std::string& key, bool def) const;
    bool has(const std::string& key) const { return cfg_.contains(key); }

    const std::filesystem::path& out_dir() const { return out_dir_; }
    int threads() const { return threads_; }

    // config echo for artifacts: everything that identifies the experiment
    nlohmann::json echo() const;

private:
    nlohmann::json cfg_;
    std::optional<EnvironmentProcess> env_;
    std::filesystem::path out_dir_ = ".";
    int threads_ = 0;
};

// Each command writes its artifacts under config.out_dir() and returns an
// exit code. Human-readable progress goes to the provided stream.
int run_classify(const RunConfig& cfg, std::ostream& log);
int run_simulate(const RunConfig& cfg, std::ostream& log);
int run_charfn(const RunConfig& cfg, std::ostream& log);
int run_density(const RunConfig& cfg, std::ostream& log);
int run_bernoulli(const RunConfig& cfg, std::ostream& log);
int run_verify(const RunConfig& cfg, std::ostream& log);

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log);

// Maps exceptions to exit codes (ConfigError -> 2, NumericRefusal -> 3).
int run_command_guarded(const std::string& command, const std::filesystem::path& config_file,
                        const CliOverrides& over, std::ostream& log, std::ostream& err);

}  // namespace bprelab
