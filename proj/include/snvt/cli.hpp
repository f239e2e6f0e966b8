#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snvt {

// Dispatches one invocation. Reports go to `out` (or the --json path),
// progress logs go to `err`. Returns the process exit code: 0 success,
// 1 usage/validation error, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace snvt
