#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace yieldest {

/// Runs the `yieldest` command line. Returns the process exit code: 0 on
/// success, 1 when the pipeline fails, 2 for usage errors.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_run(int argc, char** argv);

}  // namespace yieldest
