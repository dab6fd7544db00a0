#pragma once

namespace xsymp {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace xsymp
