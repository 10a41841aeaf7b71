#pragma once

namespace dsgd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dsgd
