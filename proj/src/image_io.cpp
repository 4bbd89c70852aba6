#include "biplanar/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "biplanar/error.hpp"

namespace biplanar {

namespace {

[[noreturn]] void unreadable(const std::string& what) { throw Error(ErrorCode::UnreadableImage, what); }

struct PngWriteBuffer {
  std::string bytes;
};

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.append(reinterpret_cast<const char*>(data), length);
}

void png_flush_noop(png_structp) {}

struct PngReadCursor {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

void png_consume(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + length > cur->size) png_error(png, "truncated PNG data");
  std::memcpy(out, cur->data + cur->pos, length);
  cur->pos += length;
}

// Row pointers are prepared by the caller so no C++ object with a destructor
// lives across the setjmp frame.
bool png_write_rows(PngWriteBuffer* buf, int width, int height, int depth, png_bytepp rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, buf, png_append, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int depth = 0;
};

// Reads into `storage` once the header is known; `alloc` sizes it.
template <typename Alloc>
const char* png_read_gray(PngReadCursor* cur, PngHeader* hdr, Alloc alloc) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return "cannot allocate PNG reader";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "cannot allocate PNG info";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "malformed PNG data";
  }
  png_set_read_fn(png, cur, png_consume);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "PNG is not single-channel grayscale";
  }
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  hdr->width = png_get_image_width(png, info);
  hdr->height = png_get_image_height(png, info);
  hdr->depth = depth;
  png_bytepp rows = alloc(*hdr);
  if (!rows) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "PNG dimensions out of range";
  }
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return nullptr;
}

GrayImage decode_png(std::string_view bytes) {
  PngReadCursor cur{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0};
  PngHeader hdr;
  std::vector<std::uint8_t> raw;
  std::vector<png_bytep> row_ptrs;
  auto alloc = [&](const PngHeader& h) -> png_bytepp {
    if (h.width == 0 || h.height == 0 || h.width > (1u << 16) || h.height > (1u << 16)) return nullptr;
    const std::size_t stride = static_cast<std::size_t>(h.width) * (h.depth / 8);
    raw.assign(stride * h.height, 0);
    row_ptrs.resize(h.height);
    for (png_uint_32 r = 0; r < h.height; ++r) row_ptrs[r] = raw.data() + r * stride;
    return row_ptrs.data();
  };
  if (const char* err = png_read_gray(&cur, &hdr, alloc)) unreadable(err);

  GrayImage img;
  img.rows = static_cast<int>(hdr.height);
  img.cols = static_cast<int>(hdr.width);
  img.bit_depth = hdr.depth;
  img.pixels.resize(static_cast<std::size_t>(img.rows) * img.cols);
  if (hdr.depth == 16) {
    std::memcpy(img.pixels.data(), raw.data(), raw.size());
  } else {
    std::copy(raw.begin(), raw.end(), img.pixels.begin());
  }
  return img;
}

// Next whitespace-delimited token of a PNM header, skipping comments.
bool pnm_token(std::string_view bytes, std::size_t& pos, std::string& out) {
  out.clear();
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) out.push_back(bytes[pos++]);
  return !out.empty();
}

GrayImage decode_pgm(std::string_view bytes) {
  std::size_t pos = 2;
  std::string w, h, maxval;
  if (!pnm_token(bytes, pos, w) || !pnm_token(bytes, pos, h) || !pnm_token(bytes, pos, maxval))
    unreadable("truncated PGM header");
  ++pos;  // single whitespace before the raster
  GrayImage img;
  int max = 0;
  try {
    img.cols = std::stoi(w);
    img.rows = std::stoi(h);
    max = std::stoi(maxval);
  } catch (const std::exception&) {
    unreadable("malformed PGM header");
  }
  if (img.cols <= 0 || img.rows <= 0 || max <= 0 || max > 65535) unreadable("PGM header values out of range");
  img.bit_depth = max > 255 ? 16 : 8;
  const std::size_t count = static_cast<std::size_t>(img.rows) * img.cols;
  const std::size_t need = count * (img.bit_depth / 8);
  if (pos > bytes.size() || bytes.size() - pos < need) unreadable("truncated PGM raster");
  img.pixels.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = img.bit_depth == 16 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
  }
  return img;
}

void write_bytes(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

}  // namespace

ImageFormat parse_image_format(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "pgm" || s == "pgm16") return ImageFormat::PGM16;
  if (s == "png" || s == "png16") return ImageFormat::PNG16;
  throw Error(ErrorCode::ParseError, "unknown image format '" + std::string(text) + "'");
}

std::string_view file_extension(ImageFormat format) { return format == ImageFormat::PGM16 ? ".pgm" : ".png"; }

GrayImage quantize(const RadiographImage& img, const ExportMapping& m) {
  if (!(m.max >= m.min) || !(m.gamma > 0)) throw Error(ErrorCode::InvalidRequest, "export mapping must be monotone");
  GrayImage out;
  out.rows = img.rows;
  out.cols = img.cols;
  out.bit_depth = 16;
  out.pixels.resize(img.pixels.size());
  const double range = m.max - m.min;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    double x = range > 0 ? std::clamp((img.pixels[i] - m.min) / range, 0.0, 1.0) : 0.0;
    if (m.gamma != 1.0) x = std::pow(x, 1.0 / m.gamma);
    if (m.invert) x = 1.0 - x;
    out.pixels[i] = static_cast<std::uint16_t>(std::lround(x * 65535.0));
  }
  return out;
}

std::string encode_pgm(const GrayImage& img) {
  std::ostringstream os;
  os << "P5\n" << img.cols << ' ' << img.rows << '\n' << (img.bit_depth == 16 ? 65535 : 255) << '\n';
  std::string bytes = os.str();
  bytes.reserve(bytes.size() + img.pixels.size() * 2);
  for (std::uint16_t v : img.pixels) {
    if (img.bit_depth == 16) bytes.push_back(static_cast<char>(v >> 8));
    bytes.push_back(static_cast<char>(v & 0xff));
  }
  return bytes;
}

std::string encode_png(const GrayImage& img) {
  const int depth = img.bit_depth == 16 ? 16 : 8;
  std::vector<std::uint8_t> narrow;
  std::vector<std::uint16_t> wide;
  std::vector<png_bytep> rows(img.rows);
  if (depth == 16) {
    wide = img.pixels;
    for (int r = 0; r < img.rows; ++r) rows[r] = reinterpret_cast<png_bytep>(wide.data() + static_cast<std::size_t>(r) * img.cols);
  } else {
    narrow.resize(img.pixels.size());
    std::transform(img.pixels.begin(), img.pixels.end(), narrow.begin(),
                   [](std::uint16_t v) { return static_cast<std::uint8_t>(v); });
    for (int r = 0; r < img.rows; ++r) rows[r] = narrow.data() + static_cast<std::size_t>(r) * img.cols;
  }
  PngWriteBuffer buf;
  if (!png_write_rows(&buf, img.cols, img.rows, depth, rows.data()))
    throw Error(ErrorCode::IoError, "PNG encoding failed");
  return std::move(buf.bytes);
}

void write_image(const GrayImage& img, const std::filesystem::path& path, ImageFormat format) {
  write_bytes(format == ImageFormat::PGM16 ? encode_pgm(img) : encode_png(img), path);
}

void export_image(const RadiographImage& img, const std::filesystem::path& path, ImageFormat format) {
  write_image(quantize(img, img.mapping), path, format);
}

GrayImage decode_image(std::string_view bytes) {
  static constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  unreadable("not a binary PGM or grayscale PNG image");
}

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) unreadable("cannot open image '" + path.string() + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    unreadable(path.string() + ": " + e.what());
  }
}

GrayImage preview8(const GrayImage& img, int max_side) {
  const int factor = std::max(1, (std::max(img.rows, img.cols) + max_side - 1) / std::max(1, max_side));
  GrayImage out;
  out.rows = std::max(1, img.rows / factor);
  out.cols = std::max(1, img.cols / factor);
  out.bit_depth = 8;
  out.pixels.assign(static_cast<std::size_t>(out.rows) * out.cols, 0);
  if (img.pixels.empty()) return out;

  const auto [lo_it, hi_it] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      double sum = 0;
      int n = 0;
      for (int rr = r * factor; rr < std::min(img.rows, (r + 1) * factor); ++rr)
        for (int cc = c * factor; cc < std::min(img.cols, (c + 1) * factor); ++cc, ++n) sum += img.at(rr, cc);
      const double x = range > 0 ? (sum / n - lo) / range : 0.0;
      out.pixels[static_cast<std::size_t>(r) * out.cols + c] = static_cast<std::uint16_t>(std::lround(x * 255.0));
    }
  }
  return out;
}

}  // namespace biplanar
