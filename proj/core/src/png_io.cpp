#include "amodal/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <string>

#include "amodal/error.hpp"

namespace amodal {

namespace {

struct IoState {
  std::vector<std::uint8_t>* out = nullptr;
  const std::uint8_t* in = nullptr;
  std::size_t in_size = 0;
  std::size_t in_pos = 0;
  char message[256] = {0};
};

void on_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<IoState*>(png_get_error_ptr(png));
  std::strncpy(st->message, msg ? msg : "png error", sizeof(st->message) - 1);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void write_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<IoState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + len);
}

void flush_bytes(png_structp) {}

void read_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<IoState*>(png_get_io_ptr(png));
  if (st->in_pos + len > st->in_size) png_error(png, "unexpected end of data (truncated file)");
  std::memcpy(data, st->in + st->in_pos, len);
  st->in_pos += len;
}

// `rows` holds height rows of `row_bytes` each, already in PNG byte order.
bool encode(IoState& st, int width, int height, int bit_depth, int color_type,
            const std::uint8_t* rows, std::size_t row_bytes) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, on_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &st, write_bytes, flush_bytes);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(rows + static_cast<std::size_t>(y) * row_bytes));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::vector<std::uint8_t> encode_or_throw(int width, int height, int bit_depth, int color_type,
                                          const std::uint8_t* rows, std::size_t row_bytes) {
  std::vector<std::uint8_t> out;
  IoState st;
  st.out = &out;
  if (!encode(st, width, height, bit_depth, color_type, rows, row_bytes))
    throw Error(ErrorKind::kIo, std::string("png encode failed: ") + st.message);
  return out;
}

struct Header {
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
};

// Two-phase decode: header first, then pixel rows into `pixels`.
bool decode(IoState& st, Header& h, std::vector<std::uint8_t>* pixels, int want_depth) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, on_error, on_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &st, read_bytes);
  png_read_info(png, info);
  h.width = png_get_image_width(png, info);
  h.height = png_get_image_height(png, info);
  h.bit_depth = png_get_bit_depth(png, info);
  h.color_type = png_get_color_type(png, info);
  if (h.color_type != PNG_COLOR_TYPE_GRAY || h.bit_depth != want_depth ||
      png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    std::snprintf(st.message, sizeof(st.message),
                  "expected %d-bit grayscale, got depth %d color type %d", want_depth, h.bit_depth,
                  h.color_type);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  const std::size_t row_bytes = static_cast<std::size_t>(h.width) * (want_depth / 8);
  std::uint8_t* base = pixels->data();
  if (pixels->size() < row_bytes * h.height) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(st.message, sizeof(st.message), "buffer too small");
    return false;
  }
  for (png_uint_32 y = 0; y < h.height; ++y) png_read_row(png, base + y * row_bytes, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

std::vector<std::uint8_t> decode_or_throw(const std::vector<std::uint8_t>& bytes, int depth,
                                          int& width, int& height) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw Error(ErrorKind::kFormat, "not a PNG file");
  // Read the header to size the buffer, then decode for real.
  png_uint_32 w = 0, h = 0;
  if (bytes.size() >= 24) {
    w = (png_uint_32(bytes[16]) << 24) | (png_uint_32(bytes[17]) << 16) |
        (png_uint_32(bytes[18]) << 8) | png_uint_32(bytes[19]);
    h = (png_uint_32(bytes[20]) << 24) | (png_uint_32(bytes[21]) << 16) |
        (png_uint_32(bytes[22]) << 8) | png_uint_32(bytes[23]);
  }
  if (w == 0 || h == 0 || w > 65536 || h > 65536)
    throw Error(ErrorKind::kFormat, "png: invalid or truncated header");
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h * (depth / 8));
  IoState st;
  st.in = bytes.data();
  st.in_size = bytes.size();
  Header hdr;
  if (!decode(st, hdr, &pixels, depth))
    throw Error(ErrorKind::kFormat, std::string("png decode failed: ") + st.message);
  width = static_cast<int>(hdr.width);
  height = static_cast<int>(hdr.height);
  return pixels;
}

}  // namespace

std::vector<std::uint8_t> encode_png_gray8(const GrayImage& image) {
  return encode_or_throw(image.width, image.height, 8, PNG_COLOR_TYPE_GRAY, image.data.data(),
                         static_cast<std::size_t>(image.width));
}

std::vector<std::uint8_t> encode_png_gray16(const LabelMap& labels) {
  std::vector<std::uint8_t> be(labels.size() * 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    be[2 * i] = static_cast<std::uint8_t>(labels[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(labels[i] & 0xFF);
  }
  return encode_or_throw(labels.width, labels.height, 16, PNG_COLOR_TYPE_GRAY, be.data(),
                         static_cast<std::size_t>(labels.width) * 2);
}

std::vector<std::uint8_t> encode_png_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw Error(ErrorKind::kShapeMismatch, "png: rgb buffer size mismatch");
  return encode_or_throw(width, height, 8, PNG_COLOR_TYPE_RGB, rgb.data(),
                         static_cast<std::size_t>(width) * 3);
}

GrayImage decode_png_gray8(const std::vector<std::uint8_t>& bytes) {
  int w = 0, h = 0;
  auto pixels = decode_or_throw(bytes, 8, w, h);
  GrayImage img(w, h);
  img.data = std::move(pixels);
  return img;
}

LabelMap decode_png_gray16(const std::vector<std::uint8_t>& bytes) {
  int w = 0, h = 0;
  auto pixels = decode_or_throw(bytes, 16, w, h);
  LabelMap m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = static_cast<std::uint16_t>((pixels[2 * i] << 8) | pixels[2 * i + 1]);
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (is.bad()) throw Error(ErrorKind::kIo, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace amodal
