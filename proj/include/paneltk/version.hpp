#pragma once

namespace paneltk {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace paneltk
