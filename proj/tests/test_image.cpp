#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nsf/error.hpp"
#include "nsf/image.hpp"

using nsf::Error;
using nsf::ErrorCode;
using nsf::GrayImage;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("PGM bytes map directly to samples") {
  const auto path = temp_file("nsf_img_direct.pgm");
  write_bytes(path, std::string("P5\n2 2\n255\n") + '\x00' + '\xff' + '\x80' + '\x40');
  const GrayImage img = nsf::load_image(path);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.data == std::vector<double>{0.0, 255.0, 128.0, 64.0});
}

TEST_CASE("PGM comments and odd whitespace are tolerated") {
  const auto path = temp_file("nsf_img_comment.pgm");
  write_bytes(path, std::string("P5 # raw\n# size next\n 2\t1 # w h\n255\n") +
                        '\x05' + '\x06');
  const GrayImage img = nsf::load_image(path);
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.data == std::vector<double>{5.0, 6.0});
}

TEST_CASE("load/save round trip preserves data exactly") {
  GrayImage img(3, 2);
  img.data = {0, 17, 255, 128, 64, 200};

  for (const char* name : {"nsf_rt.pgm", "nsf_rt.png"}) {
    CAPTURE(name);
    const auto path = temp_file(name);
    nsf::save_image(img, path);
    const GrayImage back = nsf::load_image(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.data == img.data);
  }
}

TEST_CASE("truncated PGM header is an I/O-class failure") {
  const auto path = temp_file("nsf_img_trunc.pgm");
  write_bytes(path, "P5\n2");
  CHECK_THROWS_AS(nsf::load_image(path), Error);
}

TEST_CASE("truncated PGM raster is rejected") {
  const auto path = temp_file("nsf_img_short.pgm");
  write_bytes(path, std::string("P5\n2 2\n255\n") + '\x01' + '\x02');
  CHECK_THROWS_AS(nsf::load_image(path), Error);
}

TEST_CASE("missing file raises an io error") {
  try {
    nsf::load_image("/nonexistent/nsf_missing.pgm");
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}

TEST_CASE("PGM maxval above 255 is unsupported") {
  const auto path = temp_file("nsf_img_16bit.pgm");
  write_bytes(path, std::string("P5\n1 1\n65535\n") + '\x01' + '\x02');
  try {
    nsf::load_image(path);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsupported_format);
  }
}

TEST_CASE("quantization clamps and rounds half away from zero") {
  CHECK(nsf::quantize_sample(-3.0) == 0);
  CHECK(nsf::quantize_sample(0.0) == 0);
  CHECK(nsf::quantize_sample(0.5) == 1);
  CHECK(nsf::quantize_sample(1.49) == 1);
  CHECK(nsf::quantize_sample(127.5) == 128);
  CHECK(nsf::quantize_sample(254.5) == 255);
  CHECK(nsf::quantize_sample(260.2) == 255);
}

TEST_CASE("unsupported save extension is rejected") {
  GrayImage img(1, 1);
  CHECK_THROWS_AS(nsf::save_image(img, temp_file("nsf_img.bmp")), Error);
}

TEST_CASE("validate rejects malformed rasters") {
  GrayImage bad;
  bad.width = 2;
  bad.height = 2;
  bad.data = {1.0, 2.0, 3.0};  // wrong length
  CHECK_THROWS_AS(bad.validate(), Error);

  GrayImage nan(1, 1);
  nan.data[0] = std::nan("");
  CHECK_THROWS_AS(nan.validate(), Error);
}

TEST_CASE("check_pair flags size mismatches") {
  const GrayImage a(4, 4), b(4, 5);
  try {
    nsf::check_pair(a, b);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::incompatible_pair);
  }
}
