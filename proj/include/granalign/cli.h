// granalign/cli.h
//
// Command-line front end. Exit codes: 0 success, 1 validation error, 2 data
// error, 64 usage error.

#ifndef GRANALIGN_CLI_H_
#define GRANALIGN_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace granalign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitUsage = 64;

// `args` excludes the program name. Normal output goes to `out`, progress
// and diagnostics to `err`.
int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace granalign::cli

#endif  // GRANALIGN_CLI_H_
