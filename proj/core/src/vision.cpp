#include "paraseq/vision.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "paraseq/corpus.hpp"
#include "paraseq/rng.hpp"

namespace paraseq {

GrayBitmap invert_colors(const GrayBitmap& img) {
  GrayBitmap out = img;
  for (auto& p : out.pixels) p = static_cast<std::uint8_t>(255 - p);
  return out;
}

GrayBitmap normalize_bitmap(const GrayBitmap& img) {
  if (img.height <= 0 || img.width <= 0 ||
      img.pixels.size() != static_cast<std::size_t>(img.height) * img.width)
    throw std::invalid_argument("normalize_bitmap: empty or inconsistent bitmap");
  GrayBitmap out;
  out.height = kBitmapHeight;
  out.width = kBitmapWidth;
  out.pixels.assign(static_cast<std::size_t>(kBitmapHeight) * kBitmapWidth, 0);
  const int rows = std::min(img.height, kBitmapHeight);
  const int cols = std::min(img.width, kBitmapWidth);
  for (int r = 0; r < rows; ++r)
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(r) * img.width, cols,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(r) * kBitmapWidth);
  return out;
}

namespace {
constexpr int kPatchRows = 16;
constexpr int kPatchCols = 56;
constexpr int kPatchCount = kPatchRows * kPatchCols;  // 896 patches of 25x25 px
}  // namespace

std::vector<float> stub_vision_embed(const GrayBitmap& img, std::uint64_t seed) {
  if (img.height != kBitmapHeight || img.width != kBitmapWidth)
    throw std::invalid_argument("stub_vision_embed: expected a normalized 400x1400 bitmap, got " +
                                std::to_string(img.height) + "x" + std::to_string(img.width));
  const int ph = kBitmapHeight / kPatchRows;
  const int pw = kBitmapWidth / kPatchCols;

  std::vector<double> pooled(kPatchCount, 0.0);
  for (int pr = 0; pr < kPatchRows; ++pr) {
    for (int pc = 0; pc < kPatchCols; ++pc) {
      double acc = 0;
      for (int r = pr * ph; r < (pr + 1) * ph; ++r)
        for (int c = pc * pw; c < (pc + 1) * pw; ++c) acc += img.at(r, c);
      pooled[static_cast<std::size_t>(pr) * kPatchCols + pc] = acc / (255.0 * ph * pw);
    }
  }

  // Fixed projection: regenerating from the seed keeps the provider
  // deterministic without storing a 896x1280 weight file.
  Rng rng(seed);
  std::vector<float> out(kVisionDim);
  std::vector<double> col(kPatchCount);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kPatchCount));
  for (int j = 0; j < kVisionDim; ++j) {
    for (int i = 0; i < kPatchCount; ++i) col[static_cast<std::size_t>(i)] = rng.normal() * scale;
    const double bias = rng.normal() * 0.01;
    double acc = bias;
    for (int i = 0; i < kPatchCount; ++i) acc += col[static_cast<std::size_t>(i)] * pooled[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(j)] = static_cast<float>(acc);
  }
  return out;
}

GrayBitmap read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("read_pgm: '" + path + "' is not binary PGM (P5)");
  auto skip_ws_comments = [&in] {
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
  };
  int w = 0, h = 0, maxval = 0;
  skip_ws_comments();
  in >> w;
  skip_ws_comments();
  in >> h;
  skip_ws_comments();
  in >> maxval;
  if (!in || w <= 0 || h <= 0) throw std::runtime_error("read_pgm: bad header in '" + path + "'");
  if (maxval != 255) throw std::runtime_error("read_pgm: only maxval 255 is supported");
  in.get();  // single whitespace after header
  GrayBitmap img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw std::runtime_error("read_pgm: truncated pixel data in '" + path + "'");
  return img;
}

void write_pgm(const std::string& path, const GrayBitmap& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open '" + path + "'");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

}  // namespace paraseq
