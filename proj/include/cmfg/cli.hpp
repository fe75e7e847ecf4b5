#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cmfg {

inline constexpr int kSchemaVersion = 1;

enum ExitCode { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2, kExitIo = 3 };

const std::vector<std::string>& subcommands();

// Runs one subcommand and writes report.csv, report.json and
// resolved_config.txt into out_dir. Errors are reported on stderr and mapped
// to the exit codes above.
int run_subcommand(const std::string& subcommand, const std::string& config_path, const std::string& out_dir,
                   std::optional<int> threads);

// Full command line: carleman-mfg <subcommand> --config <path> --out <dir> [--threads N].
int run_cli(int argc, char** argv);

}  // namespace cmfg
