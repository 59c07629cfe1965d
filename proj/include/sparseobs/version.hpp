#pragma once

namespace sparseobs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sparseobs
