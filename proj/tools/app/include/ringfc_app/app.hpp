#pragma once

#include "ringfc/serialize.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ringfc::app {

enum class Command { spectrum, convert, design, cascade, purity, shape, sweep, fit, synth };

const std::vector<std::string>& command_names();
std::optional<Command> parse_command(std::string_view name);
std::string command_name(Command c);

struct GlobalOptions {
    std::filesystem::path config;  // empty: defaults only
    std::filesystem::path out_dir = ".";
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<double> tolerance;
};

// Flags that belong to a single subcommand.
struct CommandOptions {
    std::vector<double> ratios;  // purity
    std::string stage;           // fit: linear | pumped | fdm
};

struct RunConfig {
    Command command = Command::spectrum;
    GlobalOptions global;
    CommandOptions options;
    nlohmann::json doc = nlohmann::json::object();
    std::filesystem::path base_dir;  // relative paths in the config resolve against this
};

struct Validation {
    std::optional<RunConfig> config;
    std::vector<io::Issue> issues;
};

// Collects every problem (unknown keys, units, ranges, missing files) before anything runs.
Validation validate_config(Command c, const GlobalOptions& g, const CommandOptions& o = {});

struct RunReport {
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> warnings;
    nlohmann::json summary = nlohmann::json::object();
};

// Throws the library error types; run_main maps them to exit codes.
RunReport run(const RunConfig& cfg);

// Validation, run, manifest. Returns the process exit code.
int run_main(Command c, const GlobalOptions& g, const CommandOptions& o, std::ostream& out, std::ostream& err);

std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

} // namespace ringfc::app
