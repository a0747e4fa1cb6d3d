#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace passviz {

inline constexpr std::string_view kVersion = "0.1.0";

/// Runs one passviz subcommand (stats, embed, plot, cluster, compare,
/// export, rerun). Returns the process exit code: 0 on success, 1 for
/// usage/domain/pattern/version errors, 2 for I/O errors, 3 for numerical
/// failures. Nothing is written to disk when a command fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace passviz
