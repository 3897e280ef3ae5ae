#pragma once

#include <iosfwd>

namespace uam::cli {

/// Entry point behind the `uam` executable. Returns 0 on success, 1 on
/// validation or runtime failure, 2 on usage errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uam::cli
