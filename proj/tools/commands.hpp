#pragma once

namespace isfno::cli {

/// Parses the command line, runs one subcommand and returns the exit code:
/// 0 success, 2 usage, 3 numerical divergence, 4 I/O.
int run(int argc, char **argv);

} // namespace isfno::cli
