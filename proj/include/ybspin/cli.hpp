#pragma once
// Command-line front end. run_cli is the whole program minus main(), so
// tests can drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace ybspin::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit status: 0 success, 1 validation or domain error, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ybspin::cli
