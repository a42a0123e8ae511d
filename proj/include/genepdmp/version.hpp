#pragma once

namespace genepdmp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace genepdmp
