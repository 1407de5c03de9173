#include "nsf/image.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nsf/error.hpp"

namespace nsf {

namespace {

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::io, "read failed for " + path.string());
  return bytes;
}

// Reads the next non-negative integer token from a PGM header, skipping
// whitespace and '#' comments that run to end of line.
long next_pgm_token(const uint8_t* p, size_t n, size_t& pos,
                    const std::filesystem::path& path) {
  while (pos < n) {
    if (std::isspace(p[pos])) {
      ++pos;
    } else if (p[pos] == '#') {
      while (pos < n && p[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= n || !std::isdigit(p[pos]))
    fail(ErrorCode::unsupported_format, "malformed PGM header in " + path.string());
  long v = 0;
  while (pos < n && std::isdigit(p[pos])) {
    v = v * 10 + (p[pos] - '0');
    if (v > 1000000000L)
      fail(ErrorCode::unsupported_format, "oversized PGM field in " + path.string());
    ++pos;
  }
  return v;
}

GrayImage load_pgm(const std::vector<uint8_t>& bytes,
                   const std::filesystem::path& path) {
  size_t pos = 2;  // past "P5"
  long w = next_pgm_token(bytes.data(), bytes.size(), pos, path);
  long h = next_pgm_token(bytes.data(), bytes.size(), pos, path);
  long maxval = next_pgm_token(bytes.data(), bytes.size(), pos, path);
  if (w <= 0 || h <= 0)
    fail(ErrorCode::invalid_image, "non-positive PGM dimensions in " + path.string());
  if (maxval <= 0 || maxval > 255)
    fail(ErrorCode::unsupported_format,
         "PGM maxval " + std::to_string(maxval) + " unsupported in " + path.string());
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    fail(ErrorCode::unsupported_format, "malformed PGM header in " + path.string());
  ++pos;  // single whitespace byte before raster data
  size_t need = size_t(w) * size_t(h);
  if (bytes.size() - pos < need)
    fail(ErrorCode::unsupported_format, "truncated PGM raster in " + path.string());
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < need; ++i) img.data[i] = double(bytes[pos + i]);
  return img;
}

GrayImage load_png(const std::vector<uint8_t>& bytes,
                   const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorCode::unsupported_format, "PNG read failed for " + path.string() + ": " + msg);
  }
  // The simplified reader reports the file's natural format before any
  // conversion: reject color, alpha, and 16-bit inputs outright.
  if (png.format != PNG_FORMAT_GRAY) {
    png_image_free(&png);
    fail(ErrorCode::unsupported_format,
         "only 8-bit grayscale PNG is supported: " + path.string());
  }
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    fail(ErrorCode::invalid_image, "empty PNG in " + path.string());
  }
  std::vector<uint8_t> pixels(size_t(png.width) * png.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorCode::unsupported_format, "PNG decode failed for " + path.string() + ": " + msg);
  }
  GrayImage img(int(png.width), int(png.height));
  for (size_t i = 0; i < pixels.size(); ++i) img.data[i] = double(pixels[i]);
  return img;
}

std::vector<uint8_t> quantize_all(const GrayImage& img) {
  std::vector<uint8_t> bytes(img.size());
  for (size_t i = 0; i < img.size(); ++i) bytes[i] = quantize_sample(img.data[i]);
  return bytes;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot create " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> bytes = quantize_all(img);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
  std::vector<uint8_t> bytes = quantize_all(img);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(img.width);
  png.height = png_uint_32(img.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes.data(), 0,
                               nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorCode::io, "PNG write failed for " + path.string() + ": " + msg);
  }
}

}  // namespace

GrayImage::GrayImage(int w, int h, double fill) : width(w), height(h) {
  if (w <= 0 || h <= 0)
    fail(ErrorCode::invalid_image, "non-positive image dimensions");
  data.assign(size_t(w) * size_t(h), fill);
}

void GrayImage::validate() const {
  if (width <= 0 || height <= 0)
    fail(ErrorCode::invalid_image, "non-positive image dimensions");
  if (data.size() != size_t(width) * size_t(height))
    fail(ErrorCode::invalid_image, "sample count disagrees with dimensions");
  for (double v : data)
    if (!std::isfinite(v))
      fail(ErrorCode::invalid_image, "non-finite sample");
}

GrayImage load_image(const std::filesystem::path& path) {
  std::vector<uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
    return load_pgm(bytes, path);
  static const uint8_t kPngSig[4] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPngSig, 4) == 0)
    return load_png(bytes, path);
  fail(ErrorCode::unsupported_format, "unrecognized image format: " + path.string());
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  img.validate();
  std::string ext = path.extension().string();
  for (char& c : ext) c = char(std::tolower(c));
  if (ext == ".pgm")
    save_pgm(img, path);
  else if (ext == ".png")
    save_png(img, path);
  else
    fail(ErrorCode::unsupported_format, "unsupported output extension: " + path.string());
}

uint8_t quantize_sample(double v) {
  if (v <= 0.0) return 0;
  if (v >= 255.0) return 255;
  return uint8_t(std::lround(v));  // lround rounds halves away from zero
}

void check_pair(const GrayImage& a, const GrayImage& b) {
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height)
    fail(ErrorCode::incompatible_pair,
         "image sizes differ: " + std::to_string(a.width) + "x" +
             std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
             std::to_string(b.height));
}

}  // namespace nsf
