#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace localscore::cli {

// Dispatches one CLI invocation. JSON goes to `out`, diagnostics to `err`.
// Exit codes: 0 success, 1 domain/evaluation errors, 2 usage errors.
// Deterministic given (args, LOCALSCORE_SEED).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace localscore::cli
