#pragma once

#include <iosfwd>

namespace mmsold {

/// Exit codes: 0 success, 1 runtime error, 2 configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmsold
