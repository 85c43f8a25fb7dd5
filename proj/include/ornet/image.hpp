// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Image file I/O: 8-bit RGB PNG (via libpng) and binary PPM (P6) for images,
// binary PGM (P5) for single-plane diagnostic dumps. Decoded values are
// scaled to [0, 1]; encoding quantizes with round-to-nearest so a
// decode(encode(x)) round trip is within 1/255 of x.
//
// I/O failures throw std::runtime_error whose message includes the byte
// offset reached when the problem was detected; argument misuse throws
// std::invalid_argument as elsewhere.
#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ornet/plane.hpp"
#include "ornet/tensor.hpp"

namespace ornet {

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("read failure on " + path);
  return data;
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failure on " + path);
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

// ---------------------------------------------------------------------------
// PNG via libpng, reading from / writing to an in-memory buffer so that
// truncation can be reported with an exact offset.
// ---------------------------------------------------------------------------

struct PngReadState {
  const std::string* buf;
  size_t offset = 0;
  std::string error;  // filled before png_error longjmps
};

inline void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->offset + n > st->buf->size()) {
    st->error = "truncated PNG at offset " + std::to_string(st->buf->size()) +
                " (needed " + std::to_string(st->offset + n) + " bytes)";
    png_error(png, "truncated");
  }
  std::memcpy(out, st->buf->data() + st->offset, n);
  st->offset += n;
}

inline void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

inline void png_flush_fn(png_structp) {}

// Quiet handlers: errors land in the setjmp recovery path (and our own
// exception) instead of libpng's default stderr print.
[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp) {
  png_longjmp(png, 1);
}
inline void png_warn_fn(png_structp, png_const_charp) {}

inline Tensor decode_png(const std::string& data, const std::string& path) {
  PngReadState st{&data, 0, {}};
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, &png_error_fn, &png_warn_fn);
  if (!png) throw std::runtime_error("libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng init failure");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> pixels;
  // libpng reports errors by longjmp back to here.
  if (setjmp(png_jmpbuf(png))) {
    std::string msg = st.error.empty()
                          ? ("PNG decode error at offset " +
                             std::to_string(st.offset))
                          : st.error;
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path + ": " + msg);
  }
  png_set_read_fn(png, &st, &png_read_fn);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  // Normalize every admissible variant to 8-bit RGB.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != static_cast<size_t>(w) * 3) {
    st.error = "unsupported PNG layout in " + path;
    png_error(png, "layout");
  }

  pixels.resize(static_cast<size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = pixels.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor t = Tensor::zeros({3, static_cast<int>(h), static_cast<int>(w)});
  auto& v = t.mutable_values();
  const size_t plane = static_cast<size_t>(w) * h;
  for (size_t i = 0; i < plane; ++i)
    for (size_t c = 0; c < 3; ++c)
      v[c * plane + i] = pixels[3 * i + c] / 255.0;
  return t;
}

inline std::string encode_png(const std::vector<png_byte>& pixels, int h,
                              int w) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            &png_error_fn, &png_warn_fn);
  if (!png) throw std::runtime_error("libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng init failure");
  }
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode error");
  }
  png_set_write_fn(png, &out, &png_write_fn, &png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y)
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(
        pixels.data() + static_cast<size_t>(y) * w * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// ---------------------------------------------------------------------------
// Binary PPM (P6), 8-bit, maxval 255.
// ---------------------------------------------------------------------------

class PnmParser {
 public:
  PnmParser(const std::string& data, const std::string& path)
      : d_(data), path_(path) {}

  // Reads the next whitespace/comment-delimited non-negative integer.
  int next_int() {
    skip_space();
    if (pos_ >= d_.size()) truncated("header integer");
    if (!std::isdigit(static_cast<unsigned char>(d_[pos_])))
      throw std::runtime_error(path_ + ": malformed header at offset " +
                               std::to_string(pos_));
    long v = 0;
    while (pos_ < d_.size() &&
           std::isdigit(static_cast<unsigned char>(d_[pos_]))) {
      v = v * 10 + (d_[pos_] - '0');
      if (v > 1 << 20)
        throw std::runtime_error(path_ + ": header value out of range");
      ++pos_;
    }
    return static_cast<int>(v);
  }

  // After the maxval exactly one whitespace byte precedes the raster.
  void expect_raster_sep() {
    if (pos_ >= d_.size()) truncated("raster separator");
    if (!std::isspace(static_cast<unsigned char>(d_[pos_])))
      throw std::runtime_error(path_ + ": missing raster separator at offset " +
                               std::to_string(pos_));
    ++pos_;
  }

  const unsigned char* raster(size_t need) {
    if (d_.size() - pos_ < need)
      throw std::runtime_error(
          path_ + ": truncated raster at offset " + std::to_string(d_.size()) +
          " (needed " + std::to_string(pos_ + need) + " bytes)");
    return reinterpret_cast<const unsigned char*>(d_.data() + pos_);
  }

  size_t pos() const { return pos_; }
  void advance(size_t n) { pos_ += n; }

 private:
  void skip_space() {
    while (pos_ < d_.size()) {
      const unsigned char c = static_cast<unsigned char>(d_[pos_]);
      if (std::isspace(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  [[noreturn]] void truncated(const char* what) {
    throw std::runtime_error(path_ + ": truncated file at offset " +
                             std::to_string(d_.size()) + " while reading " +
                             std::string(what));
  }

  const std::string& d_;
  const std::string& path_;
  size_t pos_ = 0;
};

inline Tensor decode_ppm(const std::string& data, const std::string& path) {
  PnmParser p(data, path);
  p.advance(2);  // "P6" verified by caller
  const int w = p.next_int();
  const int h = p.next_int();
  const int maxval = p.next_int();
  if (w <= 0 || h <= 0)
    throw std::runtime_error(path + ": bad PPM dimensions");
  if (maxval != 255)
    throw std::runtime_error(path + ": unsupported PPM maxval " +
                             std::to_string(maxval) + " (only 255)");
  p.expect_raster_sep();
  const size_t n = static_cast<size_t>(w) * h;
  const unsigned char* raw = p.raster(n * 3);
  Tensor t = Tensor::zeros({3, h, w});
  auto& v = t.mutable_values();
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < 3; ++c) v[c * n + i] = raw[3 * i + c] / 255.0;
  return t;
}

inline png_byte quantize(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<png_byte>(std::lround(c * 255.0));
}

// Interleave a (3,H,W) tensor in [0,1] into 8-bit RGB bytes.
inline std::vector<png_byte> to_rgb8(const Tensor& t) {
  require(t.defined() && t.ndim() == 3 && t.dim(0) == 3,
          "encode_image: tensor must be (3,H,W)");
  const size_t n = static_cast<size_t>(t.dim(1)) * t.dim(2);
  const auto& v = t.values();
  std::vector<png_byte> out(n * 3);
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < 3; ++c) out[3 * i + c] = quantize(v[c * n + i]);
  return out;
}

}  // namespace detail

// Decodes an 8-bit RGB image (PNG or binary PPM, detected by content) into a
// (3,H,W) tensor with values in [0,1].
inline Tensor decode_image(const std::string& path) {
  const std::string data = detail::read_file(path);
  if (data.size() >= 8 &&
      png_sig_cmp(reinterpret_cast<png_const_bytep>(data.data()), 0, 8) == 0)
    return detail::decode_png(data, path);
  if (data.size() >= 2 && data[0] == 'P' && data[1] == '6')
    return detail::decode_ppm(data, path);
  throw std::runtime_error(path +
                           ": unsupported format at offset 0 (not PNG or P6 "
                           "PPM)");
}

// Encodes a (3,H,W) tensor in [0,1]; the container is chosen by extension
// (.png or .ppm). Out-of-range values are clamped before 8-bit quantization.
inline void encode_image(const Tensor& t, const std::string& path) {
  const std::vector<png_byte> rgb = detail::to_rgb8(t);
  if (detail::has_suffix(path, ".png")) {
    detail::write_file(path, detail::encode_png(rgb, t.dim(1), t.dim(2)));
    return;
  }
  if (detail::has_suffix(path, ".ppm")) {
    std::string out = "P6\n" + std::to_string(t.dim(2)) + " " +
                      std::to_string(t.dim(1)) + "\n255\n";
    out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    detail::write_file(path, out);
    return;
  }
  fail("encode_image: unsupported extension on ", path, " (use .png or .ppm)");
}

// Writes a single plane as binary PGM (P5). With normalize=true the plane is
// min-max scaled to use the full 8-bit range (a constant plane maps to 0);
// otherwise values are clamped to [0,1].
inline void write_pgm(const Plane& p, const std::string& path,
                      bool normalize = true) {
  require(p.h > 0 && p.w > 0, "write_pgm: empty plane");
  double lo = p.v[0], hi = p.v[0];
  for (double v : p.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::string out =
      "P5\n" + std::to_string(p.w) + " " + std::to_string(p.h) + "\n255\n";
  for (double v : p.v) {
    const double x = normalize ? (hi > lo ? (v - lo) / (hi - lo) : 0.0) : v;
    out.push_back(static_cast<char>(detail::quantize(x)));
  }
  detail::write_file(path, out);
}

}  // namespace ornet
