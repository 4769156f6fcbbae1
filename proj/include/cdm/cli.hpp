#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdm {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitInvalid = 1,          // parse or validation failure, bad arguments
    kExitNotIdentifiable = 2,
    kExitDataMismatch = 3,
    kExitUnsupported = 4,
};

int exit_code_for(const std::string& error_kind);

/// Runs one subcommand; `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace cdm
