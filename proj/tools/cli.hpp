#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace styland::cli {

/// Runs one `styland` invocation; `args` excludes the program name. Returns
/// the process exit code: 0 on success, 1 on a runtime failure (one line on
/// `err`), other CLI11 codes on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace styland::cli
