#pragma once

namespace tidy {

/// Parses argv and runs one subcommand. Returns 0 on success and for --help,
/// 2 for usage errors (unknown subcommand or flag, missing required flag) and
/// 1 when the command itself fails.
int cli_dispatch(int argc, char** argv);

}  // namespace tidy
