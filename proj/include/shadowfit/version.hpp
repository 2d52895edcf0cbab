#pragma once

namespace shadowfit {

inline constexpr const char* kVersion = "0.1.0";

}
