#pragma once

namespace hanet {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace hanet
