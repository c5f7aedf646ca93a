#pragma once

#include <string>

#include "trifusion/core_types.hpp"

namespace trifusion {

/// Writes a [3 x H x W] image in [0,1] as an 8-bit RGB PNG. Values are
/// quantized with round(v*255); images whose values already lie on the
/// k/255 grid round-trip bit-exactly.
void write_png_rgb(const std::string& path, const Image& image);

/// Reads an 8-bit RGB(A) PNG into [3 x H x W] with values k/255.
Image read_png_rgb(const std::string& path);

}  // namespace trifusion
