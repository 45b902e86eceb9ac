#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "lvnn/cli/run_config.hpp"

namespace lvnn::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

struct CommandOptions {
    std::optional<std::filesystem::path> checkpoint;  // default <out>/checkpoint.json
    std::optional<std::filesystem::path> quotes;      // implied-vol input
    bool force = false;                               // allow overwriting outputs
};

// Each command reads its inputs fully before writing anything; outputs are
// staged next to their destination and renamed into place together with a
// manifest_<command>.json. Errors propagate as exceptions.
void cmd_generate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
void cmd_calibrate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
void cmd_audit(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
void cmd_localvol(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
void cmd_backtest(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
void cmd_implied_vol(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);

// Dispatches by name and maps exceptions to exit codes: 2 for configuration
// or input errors, 3 for numerical failures.
int run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& opts,
                std::ostream& log, std::ostream& err);

}  // namespace lvnn::cli
