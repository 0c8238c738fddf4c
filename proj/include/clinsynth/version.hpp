#pragma once

namespace clinsynth {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace clinsynth
