#pragma once

#include "relunet/io.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace relunet {

// Exit codes shared by every command.
enum ExitCode : int {
    kExitOk = 0,
    kExitParse = 2,
    kExitNegative = 3,     // not representable
    kExitCheckFailed = 4,
    kExitAllDiverged = 5,
};

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;  // rational | float
    int jobs = 1;
    bool corrupt_gradient = false;    // test hook for gradcheck
};

// Everything a command produces. Files are only written by the caller once the command has
// returned, so a failed validation never leaves partial output behind.
struct CommandResult {
    int exit_code = kExitOk;
    Json report;
    std::map<std::string, std::string> files;
};

const std::vector<std::string>& command_names();

// Validates the whole config for `command` and runs it. Throws InvalidInput (or a JSON error)
// for anything malformed; those map to exit code 2.
CommandResult run_command(const std::string& command, const Json& config, const RunOptions& options);

// Byte-stable serializations.
std::string json_text(const Json& j);
std::string trajectory_csv_header(std::size_t dim);

}  // namespace relunet
