#pragma once

namespace zadre {

inline constexpr int version_major = 0;
inline constexpr int version_minor = 1;
inline constexpr int version_patch = 0;
inline constexpr const char* version_string = "0.1.0";

/// Format version stamped into serialized models and manifests.
inline constexpr int serialization_version = 1;

}  // namespace zadre
