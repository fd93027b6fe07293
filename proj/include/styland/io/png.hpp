#pragma once

#include "styland/core/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace styland::io {

using Bytes = std::vector<std::uint8_t>;

/// Decoded PNG. `channels` is 1 (gray / palette index), 3 (RGB) or 4 (RGBA);
/// `bit_depth` is 8 or 16. Samples are row-major, interleaved; 16-bit samples
/// are stored in `samples16`.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  bool indexed = false;
  std::vector<std::uint8_t> samples8;
  std::vector<std::uint16_t> samples16;
  std::vector<std::array<std::uint8_t, 3>> palette;
};

Bytes encode_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb);
Bytes encode_gray16(int width, int height, const std::vector<std::uint16_t>& gray);
Bytes encode_indexed(int width, int height, const std::vector<std::uint8_t>& index,
                     const std::vector<std::array<std::uint8_t, 3>>& palette);

/// Throws Error(format) on malformed data. Palette images are returned as
/// indices; no expansion is applied.
PngImage decode(const Bytes& data);

Bytes read_file(const std::filesystem::path& path);
/// Writes atomically (temporary file + rename).
void write_file(const std::filesystem::path& path, const Bytes& data);

PngImage read_png(const std::filesystem::path& path);

// --- model types ------------------------------------------------------------

/// Fixed colors of the default label set, reused for any label set by index.
std::vector<std::array<std::uint8_t, 3>> label_palette(int labels);

Bytes encode_segmentation(const SegmentationMap& seg);
/// Accepts 8-bit palette or gray PNGs holding label ids.
SegmentationMap decode_segmentation(const Bytes& data, const std::vector<std::string>& label_set);

/// 16-bit gray, value = round(depth * 65535).
template <typename Scalar>
Bytes encode_depth(const DepthMap<Scalar>& depth);
template <typename Scalar>
DepthMap<Scalar> decode_depth(const Bytes& data);

/// RGB8 from [-1,1]: round((v + 1) * 127.5), clamped.
template <typename Scalar>
Bytes encode_image(const ImageTensor<Scalar>& image);
/// Accepts 8-bit RGB or RGBA (alpha dropped); values map to [-1,1].
template <typename Scalar>
ImageTensor<Scalar> decode_image(const Bytes& data);

}  // namespace styland::io
