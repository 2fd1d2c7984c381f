#pragma once

#include <string_view>

namespace vsgmn {

inline constexpr std::string_view kVersion = "v0.1.0";

}  // namespace vsgmn
