#pragma once

#include <filesystem>
#include <vector>

#include "cvsdeblur/frame.hpp"

namespace cvsdeblur::tools {

// PNG <-> Frame conversion. 8- and 16-bit PNGs scale linearly to [0,1];
// srgb_decode additionally applies the sRGB EOTF. Gray loads as 1 channel.
Frame load_png(const std::filesystem::path& path, bool srgb_decode = false);

// Clamps to [0,1] and writes an 8-bit PNG (gray or RGB by channel count).
void save_png(const std::filesystem::path& path, const Frame& f);

// Raw float32 payload, the exact values metrics run on.
void save_f32(const std::filesystem::path& path, const Frame& f);

// Numbered image files (*.png) in a directory, sorted by name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace cvsdeblur::tools
