#pragma once

namespace renergy {

inline constexpr const char* version = "1.0.0";

}  // namespace renergy
