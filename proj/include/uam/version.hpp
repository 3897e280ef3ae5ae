#pragma once

namespace uam {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace uam
