#ifndef PACVERIFY_CLI_HPP
#define PACVERIFY_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace pacverify {

// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitOracle = 3;
inline constexpr int kExitVacuous = 4;

// `args` excludes the program name, e.g. {"calc", "--eps", "0.01", ...}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pacverify

#endif  // PACVERIFY_CLI_HPP
