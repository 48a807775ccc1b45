#pragma once

namespace longtail {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace longtail
