#pragma once

namespace ccpd {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ccpd
