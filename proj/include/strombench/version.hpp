#pragma once

namespace strombench {

inline constexpr const char* kVersion = "0.1.0";

} // namespace strombench
