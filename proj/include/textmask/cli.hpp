#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "textmask/raster.hpp"

namespace textmask::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitConfig = 4;

// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "TEXTMASK_CONFIG";

// Runs the command line `args` (args[0] is the program name) and returns the
// exit code. Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Fixed palette used by the render command: id 0 is black, other ids follow
// the bit-interleaved PASCAL VOC color map.
std::array<std::uint8_t, 3> palette_color(LabelId id);

}  // namespace textmask::cli
