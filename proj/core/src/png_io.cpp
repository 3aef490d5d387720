#include "flim/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "flim/error.hpp"

namespace flim {

namespace {

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3, alpha removed
  std::vector<double> samples;  // [0, 1]
};

Decoded decode(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorCode::io, std::string("cannot decode PNG: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  const bool wide = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  // 16-bit files are read linearly so samples are not gamma re-encoded.
  image.format = (color ? PNG_FORMAT_FLAG_COLOR : 0) | (alpha ? PNG_FORMAT_FLAG_ALPHA : 0) |
                 (wide ? PNG_FORMAT_FLAG_LINEAR : 0);
  const int stored = (color ? 3 : 1) + (alpha ? 1 : 0);
  Decoded out{static_cast<int>(image.height), static_cast<int>(image.width), color ? 3 : 1, {}};
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  out.samples.resize(n * static_cast<std::size_t>(out.channels));
  if (wide) {
    std::vector<png_uint_16> buf(n * static_cast<std::size_t>(stored));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
      fail(ErrorCode::io, std::string("cannot decode PNG: ") + image.message);
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (int c = 0; c < out.channels; ++c) {
        out.samples[p * out.channels + c] = buf[p * stored + c] / 65535.0;
      }
    }
  } else {
    std::vector<png_byte> buf(n * static_cast<std::size_t>(stored));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
      fail(ErrorCode::io, std::string("cannot decode PNG: ") + image.message);
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (int c = 0; c < out.channels; ++c) {
        out.samples[p * out.channels + c] = buf[p * stored + c] / 255.0;
      }
    }
  }
  return out;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

Bytes encode_raw(int height, int width, int channels, const std::vector<std::uint8_t>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorCode::io, std::string("cannot encode PNG: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorCode::io, std::string("cannot encode PNG: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes) {
  Decoded d = decode(bytes);
  return Image(d.height, d.width, d.channels, std::move(d.samples));
}

LabelRaster decode_label_png(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode(bytes);
  LabelRaster r{d.height, d.width, std::vector<std::uint8_t>(static_cast<std::size_t>(d.height) * d.width)};
  for (std::size_t p = 0; p < r.values.size(); ++p) {
    const double v = d.samples[p * d.channels];
    for (int c = 1; c < d.channels; ++c) {
      require(d.samples[p * d.channels + c] == v, ErrorCode::invalid_argument,
              "marker PNG must be grayscale");
    }
    r.values[p] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return r;
}

Image decode_mask_png(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode(bytes);
  Image mask(d.height, d.width, 1);
  for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
    mask.data()[p] = std::lround(d.samples[p * d.channels] * 255.0) > 127 ? 1.0 : 0.0;
  }
  return mask;
}

Bytes encode_gray_png(const Image& map) {
  std::vector<std::uint8_t> px(map.pixel_count());
  for (std::size_t p = 0; p < px.size(); ++p) {
    px[p] = to_byte(map.data()[p * static_cast<std::size_t>(map.channels())]);
  }
  return encode_raw(map.height(), map.width(), 1, px);
}

Bytes encode_png(const Image& img) {
  require(img.channels() == 1 || img.channels() == 3, ErrorCode::invalid_argument,
          "PNG output needs 1 or 3 channels");
  std::vector<std::uint8_t> px(img.size());
  for (std::size_t k = 0; k < px.size(); ++k) px[k] = to_byte(img.data()[k]);
  return encode_raw(img.height(), img.width(), img.channels(), px);
}

Bytes encode_label_png(const LabelRaster& raster) {
  return encode_raw(raster.height, raster.width, 1, raster.values);
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
}

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  std::error_code ec;
  require(std::filesystem::is_directory(dir, ec), ErrorCode::io, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

}  // namespace flim
