#pragma once

namespace rwmcv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rwmcv
