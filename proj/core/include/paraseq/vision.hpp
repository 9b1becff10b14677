#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace paraseq {

inline constexpr int kBitmapHeight = 400;
inline constexpr int kBitmapWidth = 1400;

struct GrayBitmap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, |pixels| == height*width

  std::uint8_t at(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * width + c];
  }
  std::uint8_t& at(int r, int c) {
    return pixels[static_cast<std::size_t>(r) * width + c];
  }
};

/// p -> 255 - p; an involution mapping white page background to 0.
GrayBitmap invert_colors(const GrayBitmap& img);

/// Crops/pads to exactly 400x1400, content anchored top-left: oversize
/// dimensions keep the top/left window, undersize ones are padded with 0.
/// Run after invert_colors so the padding matches the inverted background.
GrayBitmap normalize_bitmap(const GrayBitmap& img);

/// Deterministic stand-in for the frozen CNN backbone: mean-pools the
/// normalized bitmap over a 16x56 patch grid and applies a fixed seeded
/// random projection (with bias) to 1280 dims.
std::vector<float> stub_vision_embed(const GrayBitmap& img, std::uint64_t seed = 0x76697321ull);

/// Binary PGM (P5, maxval 255) I/O.
GrayBitmap read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayBitmap& img);

}  // namespace paraseq
