#pragma once

#include <string_view>

namespace robophoto {

inline constexpr std::string_view kToolName = "robophoto";
inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace robophoto
