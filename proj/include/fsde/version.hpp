#pragma once

namespace fsde {
inline constexpr const char* kVersion = "0.1.0";
}
