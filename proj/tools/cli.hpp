#ifndef RANKCF_CLI_HPP
#define RANKCF_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace rankcf {

// Runs the command line tool. Exit codes: 0 success, 1 usage or validation
// error, 2 runtime error (coverage, degenerate input, IO).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Full help text: every subcommand with all of its flags.
std::string cli_help();

}  // namespace rankcf

#endif  // RANKCF_CLI_HPP
