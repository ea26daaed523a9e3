#pragma once

namespace relulab {

inline constexpr const char* kLibraryVersion = "0.1.0";

} // namespace relulab
