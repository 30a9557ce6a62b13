#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pmem::cli {

/// Runs the `pmem` command line. args excludes the program name. Returns the
/// process exit code: 0 on success, 1 on failed checks or runtime errors,
/// CLI11's code on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pmem::cli
