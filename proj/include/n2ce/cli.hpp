#ifndef N2CE_CLI_HPP
#define N2CE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace n2ce {

/// Subcommand names in the order shown by the usage text.
const std::vector<std::string>& subcommand_names();

/// Runs `n2ce <subcommand> [--config FILE] [--out DIR] [--seed N]`.
/// `args` excludes the program name. Progress lines go to `out`;
/// usage text and the JSON error record go to `err`.
///
/// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid
/// config, 4 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace n2ce

#endif  // N2CE_CLI_HPP
