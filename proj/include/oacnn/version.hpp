#pragma once

namespace oacnn {

inline constexpr const char *kToolVersion = "0.1.0";

} // namespace oacnn
