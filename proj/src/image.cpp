#include "anonet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "anonet/core/errors.hpp"

namespace anonet {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw FormatError("cannot open '" + path.string() + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw FormatError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("libpng initialization failed");
  }
  GrayImage img;
  std::vector<png_byte> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const std::size_t channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * h);
  rows.resize(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = GrayImage(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      unsigned sum = 0;
      for (std::size_t c = 0; c < channels; ++c) sum += rows[y][x * channels + c];
      img.at(y, x) = static_cast<float>(static_cast<double>(sum) / (255.0 * static_cast<double>(channels)));
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, std::size_t h, std::size_t w,
               const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw FormatError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  const std::string magic = pgm_token(in);
  if (magic != "P5" && magic != "P2") throw FormatError("'" + path.string() + "' is not a PGM file");
  std::size_t w = 0, h = 0;
  unsigned maxval = 0;
  try {
    w = std::stoul(pgm_token(in));
    h = std::stoul(pgm_token(in));
    maxval = static_cast<unsigned>(std::stoul(pgm_token(in)));
  } catch (const std::exception&) {
    throw FormatError("bad PGM header in '" + path.string() + "'");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw FormatError("bad PGM header");
  GrayImage img(h, w);
  if (magic == "P5") {
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(w * h * bpp);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError("truncated PGM");
    for (std::size_t i = 0; i < w * h; ++i) {
      const unsigned v = bpp == 2 ? (raw[2 * i] << 8u) | raw[2 * i + 1] : raw[i];
      img.pixels[i] = static_cast<float>(static_cast<double>(v) / maxval);
    }
  } else {
    for (std::size_t i = 0; i < w * h; ++i) {
      unsigned v;
      if (!(in >> v)) throw FormatError("truncated PGM");
      img.pixels[i] = static_cast<float>(static_cast<double>(v) / maxval);
    }
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, std::size_t h, std::size_t w,
               const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

bool is_image_file(const std::filesystem::path& path) {
  const std::string e = lower_ext(path);
  return e == ".png" || e == ".pgm";
}

GrayImage read_image(const std::filesystem::path& path) {
  const std::string e = lower_ext(path);
  if (e == ".png") return read_png(path);
  if (e == ".pgm") return read_pgm(path);
  throw FormatError("unsupported image extension '" + path.string() + "'");
}

void write_gray8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                 const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() != height * width) throw ShapeError("write_gray8: buffer size mismatch");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string e = lower_ext(path);
  if (e == ".png") {
    write_png(path, height, width, bytes);
  } else if (e == ".pgm") {
    write_pgm(path, height, width, bytes);
  } else {
    throw FormatError("unsupported image extension '" + path.string() + "'");
  }
}

void write_image(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint8_t> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.pixels[i]), 0.0, 1.0);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  write_gray8(path, img.height, img.width, bytes);
}

}  // namespace anonet
