// cli_app.hpp - `steode` command-line surface.

#ifndef STEODE_TOOLS_CLI_APP_HPP
#define STEODE_TOOLS_CLI_APP_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace steode::cli {

/// Runs the CLI. Errors are reported as one JSON object on `err` and a
/// nonzero return value.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Full `--help` text of the top-level app or of one subcommand.
std::string help_text(const std::string& subcommand = "");

} // namespace steode::cli

#endif // STEODE_TOOLS_CLI_APP_HPP
