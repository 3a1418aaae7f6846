#pragma once

#include <iosfwd>

namespace posevid::cli {

// Runs one subcommand. Returns 0 on success, 1 on a domain error, 2 on a usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace posevid::cli
