#pragma once

namespace spdc {

inline constexpr const char* kToolName = "spdc-epr";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace spdc
