#pragma once

namespace rspg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rspg
