#pragma once

namespace cbench {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cbench
