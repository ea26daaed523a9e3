#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace relulab {

/// Exit codes: 0 success, 1 an asserted property failed (or a run error), 2 bad config or usage.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace relulab
