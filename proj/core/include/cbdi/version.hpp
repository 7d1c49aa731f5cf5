#pragma once

namespace cbdi {
inline constexpr const char* kVersion = "0.1.0";
}
