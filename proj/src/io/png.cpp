#include "styland/io/png.hpp"

#include "styland/core/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace styland::io {

namespace {

struct ReadCursor {
  const Bytes* data;
  std::size_t pos;
};

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void read_from_cursor(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + length > cur->data->size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(data, cur->data->data() + cur->pos, length);
  cur->pos += length;
}

// Rows are prepared by the caller as big-endian byte rows.
Bytes encode(int width, int height, int bit_depth, int color_type, const std::vector<std::uint8_t>& rows_bytes,
             std::size_t row_stride, const std::vector<std::array<std::uint8_t, 3>>* palette) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::invalid_argument, "PNG dimensions must be positive");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw Error(ErrorKind::io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  Bytes out;
  std::vector<png_color> colors;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, write_to_vector, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (palette) {
    for (const auto& c : *palette) colors.push_back(png_color{c[0], c[1], c[2]});
    png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
  }
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rows_bytes.data() + static_cast<std::size_t>(y) * row_stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

const std::array<std::array<std::uint8_t, 3>, 16> kBasePalette{{
    {135, 190, 235},  // sky
    {110, 100, 120},  // mountain
    {40, 110, 50},    // tree
    {120, 190, 80},   // grass
    {150, 110, 70},   // earth
    {40, 90, 170},    // water
    {140, 140, 135},  // rock
    {230, 200, 60},  {200, 60, 60},   {60, 200, 200}, {200, 60, 200}, {240, 140, 40},
    {90, 60, 30},    {255, 255, 255}, {30, 30, 30},   {160, 200, 160},
}};

}  // namespace

Bytes encode_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw Error(ErrorKind::shape_mismatch, "RGB buffer size mismatch");
  return encode(width, height, 8, PNG_COLOR_TYPE_RGB, rgb, static_cast<std::size_t>(width) * 3, nullptr);
}

Bytes encode_gray16(int width, int height, const std::vector<std::uint16_t>& gray) {
  if (gray.size() != static_cast<std::size_t>(width) * height) throw Error(ErrorKind::shape_mismatch, "gray buffer size mismatch");
  std::vector<std::uint8_t> bytes(gray.size() * 2);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(gray[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(gray[i] & 0xff);
  }
  return encode(width, height, 16, PNG_COLOR_TYPE_GRAY, bytes, static_cast<std::size_t>(width) * 2, nullptr);
}

Bytes encode_indexed(int width, int height, const std::vector<std::uint8_t>& index,
                     const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (index.size() != static_cast<std::size_t>(width) * height) throw Error(ErrorKind::shape_mismatch, "index buffer size mismatch");
  if (palette.empty() || palette.size() > 256) throw Error(ErrorKind::invalid_argument, "palette must hold 1..256 colors");
  for (auto v : index) {
    if (v >= palette.size()) throw Error(ErrorKind::out_of_range, "palette index out of range");
  }
  return encode(width, height, 8, PNG_COLOR_TYPE_PALETTE, index, static_cast<std::size_t>(width), &palette);
}

PngImage decode(const Bytes& data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw Error(ErrorKind::format, "not a PNG file");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw Error(ErrorKind::io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&data, 0};
  PngImage img;
  std::vector<std::uint8_t> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::format, "PNG decode failed: " + error);
  }
  png_set_read_fn(png, &cursor, read_from_cursor);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  if (color == PNG_COLOR_TYPE_PALETTE) {
    img.indexed = true;
    png_colorp plte = nullptr;
    int n = 0;
    png_get_PLTE(png, info, &plte, &n);
    for (int i = 0; i < n; ++i) img.palette.push_back({plte[i].red, plte[i].green, plte[i].blue});
    if (depth < 8) png_set_packing(png);
    depth = 8;
  } else if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  img.channels = png_get_channels(png, info);
  img.bit_depth = depth;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * static_cast<std::size_t>(img.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (img.bit_depth == 16) {
    img.samples16.resize(raw.size() / 2);
    for (std::size_t i = 0; i < img.samples16.size(); ++i) {
      img.samples16[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  } else {
    img.samples8 = std::move(raw);
  }
  return img;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const Bytes& data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io, "cannot write " + path.string() + ": " + ec.message());
}

PngImage read_png(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::array<std::uint8_t, 3>> label_palette(int labels) {
  std::vector<std::array<std::uint8_t, 3>> p;
  for (int i = 0; i < labels; ++i) {
    auto c = kBasePalette[static_cast<std::size_t>(i) % kBasePalette.size()];
    if (i >= static_cast<int>(kBasePalette.size())) c[0] = static_cast<std::uint8_t>(c[0] ^ (i & 0xff));
    p.push_back(c);
  }
  return p;
}

Bytes encode_segmentation(const SegmentationMap& seg) {
  std::vector<std::uint8_t> idx(static_cast<std::size_t>(seg.height()) * seg.width());
  for (int y = 0; y < seg.height(); ++y) {
    for (int x = 0; x < seg.width(); ++x) idx[static_cast<std::size_t>(y) * seg.width() + x] = seg.labels()(y, x);
  }
  return encode_indexed(seg.width(), seg.height(), idx, label_palette(seg.label_count()));
}

SegmentationMap decode_segmentation(const Bytes& data, const std::vector<std::string>& label_set) {
  const auto img = decode(data);
  if (img.channels != 1 || img.bit_depth != 8) {
    throw Error(ErrorKind::format, "segmentation PNG must be 8-bit indexed or gray");
  }
  LabelGrid g(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) g(y, x) = img.samples8[static_cast<std::size_t>(y) * img.width + x];
  }
  SegmentationMap seg(std::move(g), label_set);
  seg.validate();
  return seg;
}

template <typename Scalar>
Bytes encode_depth(const DepthMap<Scalar>& depth) {
  std::vector<std::uint16_t> gray(static_cast<std::size_t>(depth.height()) * depth.width());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double v = std::clamp(static_cast<double>(depth(y, x)), 0.0, 1.0);
      gray[static_cast<std::size_t>(y) * depth.width() + x] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
  }
  return encode_gray16(depth.width(), depth.height(), gray);
}

template <typename Scalar>
DepthMap<Scalar> decode_depth(const Bytes& data) {
  const auto img = decode(data);
  if (img.channels != 1 || img.indexed) throw Error(ErrorKind::format, "depth PNG must be single-channel gray");
  Grid<Scalar> v(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto i = static_cast<std::size_t>(y) * img.width + x;
      v(y, x) = img.bit_depth == 16 ? static_cast<Scalar>(img.samples16[i] / 65535.0) : static_cast<Scalar>(img.samples8[i] / 255.0);
    }
  }
  return DepthMap<Scalar>(std::move(v));
}

template <typename Scalar>
Bytes encode_image(const ImageTensor<Scalar>& image) {
  const auto& t = image.tensor();
  if (t.n() != 1 || t.c() != 3) throw Error(ErrorKind::shape_mismatch, "image must be (1,3,H,W), got " + nn::to_string(t.shape()));
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(t.h()) * t.w() * 3);
  for (int y = 0; y < t.h(); ++y) {
    for (int x = 0; x < t.w(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp((static_cast<double>(t.at(0, c, y, x)) + 1.0) * 127.5, 0.0, 255.0);
        rgb[(static_cast<std::size_t>(y) * t.w() + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return encode_rgb8(t.w(), t.h(), rgb);
}

template <typename Scalar>
ImageTensor<Scalar> decode_image(const Bytes& data) {
  const auto img = decode(data);
  if (img.bit_depth != 8 || img.indexed || (img.channels != 3 && img.channels != 4)) {
    throw Error(ErrorKind::format, "image PNG must be 8-bit RGB or RGBA");
  }
  nn::Tensor<Scalar> t(nn::Shape{1, 3, img.height, img.width});
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const auto v = img.samples8[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c];
        t.at(0, c, y, x) = static_cast<Scalar>(v / 127.5 - 1.0);
      }
    }
  }
  return ImageTensor<Scalar>(std::move(t));
}

template Bytes encode_depth(const DepthMap<float>&);
template Bytes encode_depth(const DepthMap<double>&);
template DepthMap<float> decode_depth(const Bytes&);
template DepthMap<double> decode_depth(const Bytes&);
template Bytes encode_image(const ImageTensor<float>&);
template Bytes encode_image(const ImageTensor<double>&);
template ImageTensor<float> decode_image(const Bytes&);
template ImageTensor<double> decode_image(const Bytes&);

}  // namespace styland::io
