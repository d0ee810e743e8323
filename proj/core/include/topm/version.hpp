#pragma once

namespace topm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace topm
