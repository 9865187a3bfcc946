#pragma once

#include <iosfwd>

namespace gdr::cli {

/// Runs the `gdr` command line. Returns 0 on success, 1 on validation or
/// ingestion errors and 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gdr::cli
