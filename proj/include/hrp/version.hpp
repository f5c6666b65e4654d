#pragma once

namespace hrp {

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace hrp
