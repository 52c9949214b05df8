#pragma once

namespace polsqz {
inline constexpr const char* kVersion = "0.1.0";
}
