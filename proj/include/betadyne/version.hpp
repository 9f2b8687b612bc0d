#pragma once

namespace betadyne {
inline constexpr const char* kVersion = "0.1.0";
}
