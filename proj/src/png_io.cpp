#include "yieldest/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "yieldest/errors.hpp"

namespace yieldest {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

// Decodes to 8-bit with either 1 (gray) or 3 (rgb) channels.
Decoded decode(const std::filesystem::path& path, bool want_rgb) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_rgb && is_gray) png_set_gray_to_rgb(png);
  if (!want_rgb && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  Decoded out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.pixels.resize(stride * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return out;
}

struct Sink {
  std::FILE* file = nullptr;
  std::string* buffer = nullptr;
};

void write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* sink = static_cast<Sink*>(png_get_io_ptr(png));
  if (sink->buffer) {
    sink->buffer->append(reinterpret_cast<const char*>(data), len);
  } else if (std::fwrite(data, 1, len, sink->file) != len) {
    png_error(png, "write failed");
  }
}

void flush_fn(png_structp) {}

void encode(Sink& sink, int width, int height, int color_type, int depth, const std::vector<const std::uint8_t*>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_set_write_fn(png, &sink, write_fn, flush_fn);
  png_set_IHDR(png, info, width, height, depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto* row : rows) png_write_row(png, const_cast<png_bytep>(row));
  png_write_end(png, nullptr);
}

std::vector<const std::uint8_t*> row_ptrs(const std::uint8_t* base, int height, std::size_t stride) {
  std::vector<const std::uint8_t*> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = base + stride * y;
  return rows;
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) {
  Decoded d = decode(path, true);
  return RgbImage(d.width, d.height, std::move(d.pixels));
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
  FilePtr f = open_file(path, "wb");
  Sink sink{f.get(), nullptr};
  encode(sink, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8,
         row_ptrs(img.data().data(), img.height(), 3 * static_cast<std::size_t>(img.width())));
}

std::string encode_png_rgb(const RgbImage& img) {
  std::string out;
  Sink sink{nullptr, &out};
  encode(sink, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8,
         row_ptrs(img.data().data(), img.height(), 3 * static_cast<std::size_t>(img.width())));
  return out;
}

BinaryMask read_png_mask(const std::filesystem::path& path) {
  const Decoded d = decode(path, false);
  BinaryMask mask(d.width, d.height);
  for (long i = 0; i < static_cast<long>(d.width) * d.height; ++i) mask.set(i, d.pixels[i] != 0);
  return mask;
}

void write_png_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> gray(mask.bits().size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits()[i] ? 255 : 0;
  FilePtr f = open_file(path, "wb");
  Sink sink{f.get(), nullptr};
  encode(sink, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 8,
         row_ptrs(gray.data(), mask.height(), static_cast<std::size_t>(mask.width())));
}

void write_png_labels16(const std::filesystem::path& path, int width, int height, const std::vector<int>& labels) {
  std::vector<std::uint8_t> buf(labels.size() * 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(labels[i]);
    buf[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG is big-endian
    buf[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  FilePtr f = open_file(path, "wb");
  Sink sink{f.get(), nullptr};
  encode(sink, width, height, PNG_COLOR_TYPE_GRAY, 16, row_ptrs(buf.data(), height, 2 * static_cast<std::size_t>(width)));
}

}  // namespace yieldest
