#pragma once

/**
 * CLI entry points, separated from main() so integration tests can invoke
 * them in-process. Exit codes: 0 success, 1 fatal error (bad flags, missing
 * inputs), 2 partial failure (some questions errored but the run finished).
 */

#include <string>
#include <vector>

namespace aor::cli {

int run_main(const std::vector<std::string>& args);

} // namespace aor::cli
