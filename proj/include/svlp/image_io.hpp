#pragma once

// PNG (8/16-bit gray or RGB) and binary PGM/PPM reading and writing.
// Samples are mapped linearly between integer codes and [0,1].

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "svlp/image.hpp"

namespace svlp {

struct ImageFile {
  ImageF image;
  int bit_depth = 8;
};

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(),
                         [](unsigned char c) { return std::tolower(c); });
  return ext;
}

inline bool is_pnm_path(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors through longjmp. Everything the decoder touches
// after setjmp lives on the heap behind a pointer fixed beforehand, so
// nothing automatic is left indeterminate when the jump lands.
struct PngState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  bool writing = false;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  bool has_trns = false;
  char message[256] = {};

  ~PngState() {
    if (writing) {
      png_destroy_write_struct(&png, info ? &info : nullptr);
    } else if (png) {
      png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
  }
};

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

inline ImageFile read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorKind::kIo, "cannot open " + path.string());

  auto state = std::make_unique<PngState>();
  PngState* const st = state.get();
  st->png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st,
                                   png_error_handler, png_warning_handler);
  if (!st->png) throw Error(ErrorKind::kIo, "libpng init failed");
  st->info = png_create_info_struct(st->png);
  if (!st->info) throw Error(ErrorKind::kIo, "libpng init failed");

  if (setjmp(png_jmpbuf(st->png))) {
    throw Error(ErrorKind::kFormat,
                path.string() + ": invalid PNG (" + st->message + ")");
  }
  png_init_io(st->png, file.get());
  png_read_info(st->png, st->info);
  st->width = png_get_image_width(st->png, st->info);
  st->height = png_get_image_height(st->png, st->info);
  st->bit_depth = png_get_bit_depth(st->png, st->info);
  st->color_type = png_get_color_type(st->png, st->info);
  st->has_trns = png_get_valid(st->png, st->info, PNG_INFO_tRNS) != 0;
  if ((st->color_type & PNG_COLOR_MASK_ALPHA) || st->has_trns) {
    throw Error(ErrorKind::kFormat,
                path.string() + ": alpha channel is not supported");
  }
  if (st->color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(st->png);
    st->bit_depth = 8;
  } else if (st->bit_depth != 8 && st->bit_depth != 16) {
    throw Error(ErrorKind::kFormat, path.string() + ": unsupported bit depth " +
                                        std::to_string(st->bit_depth));
  }
  if (st->bit_depth == 16) png_set_swap(st->png);  // native little-endian
  png_read_update_info(st->png, st->info);
  const std::size_t rowbytes = png_get_rowbytes(st->png, st->info);
  st->pixels.resize(rowbytes * st->height);
  st->rows.resize(st->height);
  for (png_uint_32 y = 0; y < st->height; ++y) {
    st->rows[y] = st->pixels.data() + y * rowbytes;
  }
  png_read_image(st->png, st->rows.data());
  png_read_end(st->png, nullptr);

  const int channels =
      (st->color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  ImageFile result{ImageF(static_cast<int>(st->width),
                          static_cast<int>(st->height), channels),
                   st->bit_depth};
  const double scale = 1.0 / ((1 << st->bit_depth) - 1);
  for (png_uint_32 y = 0; y < st->height; ++y) {
    const png_byte* row = st->rows[y];
    for (png_uint_32 x = 0; x < st->width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t idx = static_cast<std::size_t>(x) * channels + c;
        unsigned code;
        if (st->bit_depth == 16) {
          std::uint16_t v;
          std::memcpy(&v, row + 2 * idx, 2);
          code = v;
        } else {
          code = row[idx];
        }
        result.image.at(static_cast<int>(x), static_cast<int>(y), c) =
            code * scale;
      }
    }
  }
  return result;
}

inline unsigned quantize(double v, unsigned max_code) {
  const double clamped = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  return static_cast<unsigned>(std::lround(clamped * max_code));
}

inline void write_png(const ImageF& img, const std::filesystem::path& path,
                      int bit_depth) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorKind::kIo, "cannot write " + path.string());

  auto state = std::make_unique<PngState>();
  PngState* const st = state.get();
  st->writing = true;
  st->width = static_cast<png_uint_32>(img.width());
  st->height = static_cast<png_uint_32>(img.height());
  st->bit_depth = bit_depth;
  const int channels = img.channels();
  const std::size_t bytes = bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = st->width * channels * bytes;
  st->pixels.resize(rowbytes * st->height);
  st->rows.resize(st->height);
  const unsigned max_code = bit_depth == 16 ? 65535u : 255u;
  for (png_uint_32 y = 0; y < st->height; ++y) {
    png_byte* row = st->pixels.data() + y * rowbytes;
    st->rows[y] = row;
    for (png_uint_32 x = 0; x < st->width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const unsigned code = quantize(
            img.at(static_cast<int>(x), static_cast<int>(y), c), max_code);
        const std::size_t idx = static_cast<std::size_t>(x) * channels + c;
        if (bit_depth == 16) {
          row[2 * idx] = static_cast<png_byte>(code >> 8);  // PNG is big-endian
          row[2 * idx + 1] = static_cast<png_byte>(code & 0xff);
        } else {
          row[idx] = static_cast<png_byte>(code);
        }
      }
    }
  }

  st->png = png_create_write_struct(PNG_LIBPNG_VER_STRING, st,
                                    png_error_handler, png_warning_handler);
  if (!st->png) throw Error(ErrorKind::kIo, "libpng init failed");
  st->info = png_create_info_struct(st->png);
  if (!st->info) throw Error(ErrorKind::kIo, "libpng init failed");
  if (setjmp(png_jmpbuf(st->png))) {
    throw Error(ErrorKind::kIo,
                "failed writing " + path.string() + " (" + st->message + ")");
  }
  png_init_io(st->png, file.get());
  png_set_IHDR(st->png, st->info, st->width, st->height, st->bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(st->png, st->info);
  png_write_image(st->png, st->rows.data());
  png_write_end(st->png, nullptr);
  if (std::fflush(file.get()) != 0) {
    throw Error(ErrorKind::kIo, "failed writing " + path.string());
  }
}

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

inline ImageFile read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  const auto bad = [&](const std::string& why) {
    return Error(ErrorKind::kFormat, path.string() + ": " + why);
  };
  char magic[2] = {};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw bad("not a binary PGM/PPM file");
  }
  const int channels = magic[1] == '5' ? 1 : 3;
  long width = 0, height = 0, maxval = 0;
  skip_pnm_space(in);
  in >> width;
  skip_pnm_space(in);
  in >> height;
  skip_pnm_space(in);
  in >> maxval;
  if (!in || width < 1 || height < 1) throw bad("bad header");
  if (maxval != 255 && maxval != 65535) {
    throw bad("unsupported maxval " + std::to_string(maxval));
  }
  in.get();  // single whitespace before raster
  const int bit_depth = maxval == 255 ? 8 : 16;
  const std::size_t bytes = bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> raster(static_cast<std::size_t>(width) * height *
                                    channels * bytes);
  in.read(reinterpret_cast<char*>(raster.data()),
          static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
    throw bad("truncated raster");
  }
  ImageFile result{ImageF(static_cast<int>(width), static_cast<int>(height),
                          channels),
                   bit_depth};
  const double scale = 1.0 / static_cast<double>(maxval);
  std::size_t i = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c, ++i) {
        const unsigned code = bit_depth == 16
                                  ? (raster[2 * i] << 8) | raster[2 * i + 1]
                                  : raster[i];
        result.image.at(x, y, c) = code * scale;
      }
    }
  }
  return result;
}

inline void write_pnm(const ImageF& img, const std::filesystem::path& path,
                      int bit_depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  const unsigned max_code = bit_depth == 16 ? 65535u : 255u;
  out << (img.channels() == 1 ? "P5" : "P6") << '\n'
      << img.width() << ' ' << img.height() << '\n'
      << max_code << '\n';
  std::vector<unsigned char> raster;
  raster.reserve(img.size() * (bit_depth == 16 ? 2 : 1));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const unsigned code = quantize(img.at(x, y, c), max_code);
        if (bit_depth == 16) raster.push_back(static_cast<unsigned char>(code >> 8));
        raster.push_back(static_cast<unsigned char>(code & 0xff));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

}  // namespace detail

/// Reads a PNG or binary PGM/PPM and reports its bit depth.
inline ImageFile read_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorKind::kIo, "cannot read " + path.string());
  }
  return detail::is_pnm_path(path) ? detail::read_pnm(path)
                                   : detail::read_png(path);
}

inline ImageF load_image(const std::filesystem::path& path) {
  return read_image(path).image;
}

/// Clamps to [0,1], rounds to the nearest code and writes PNG, or PGM/PPM
/// when the extension asks for it.
inline void save_image(const ImageF& img, const std::filesystem::path& path,
                       int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw Error(ErrorKind::kConfig, "bit depth must be 8 or 16");
  }
  if (img.empty()) throw Error(ErrorKind::kDimension, "cannot save empty image");
  if (detail::is_pnm_path(path)) {
    detail::write_pnm(img, path, bit_depth);
  } else {
    detail::write_png(img, path, bit_depth);
  }
}

}  // namespace svlp
