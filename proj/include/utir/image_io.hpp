#pragma once

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "utir/errors.hpp"
#include "utir/raster.hpp"

namespace utir {

// ---------------------------------------------------------------------------
// Native float raster format (.utr)
//
//   magic "UTIR" | u32 version (=1) | u32 width | u32 height |
//   u8 kind (0 = real, 1 = complex) | f64 pitch |
//   row-major little-endian float32 payload (complex interleaved re, im)
//
// Doubles are narrowed to float32 on write; read(write(x)) is exact to float32
// quantization. All integers little-endian.
// ---------------------------------------------------------------------------

namespace detail_io {

inline constexpr char kMagic[4] = {'U', 'T', 'I', 'R'};
inline constexpr uint32_t kVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path);
    return f;
}

template <typename T>
void write_le(std::FILE* f, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));  // host is little-endian; format is LE
    if (std::fwrite(buf, 1, sizeof(T), f) != sizeof(T)) throw IoError("short write");
}

template <typename T>
T read_le(std::FILE* f, const std::string& path) {
    unsigned char buf[sizeof(T)];
    if (std::fread(buf, 1, sizeof(T), f) != sizeof(T)) throw IoError("truncated file: " + path);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

inline void write_f32_block(std::FILE* f, const std::vector<float>& data) {
    if (!data.empty() && std::fwrite(data.data(), sizeof(float), data.size(), f) != data.size())
        throw IoError("short write");
}

inline std::vector<float> read_f32_block(std::FILE* f, size_t count, const std::string& path) {
    std::vector<float> data(count);
    if (count && std::fread(data.data(), sizeof(float), count, f) != count)
        throw IoError("truncated file: " + path);
    return data;
}

inline void write_header(std::FILE* f, uint32_t w, uint32_t h, uint8_t kind, double pitch) {
    if (std::fwrite(kMagic, 1, 4, f) != 4) throw IoError("short write");
    write_le<uint32_t>(f, kVersion);
    write_le<uint32_t>(f, w);
    write_le<uint32_t>(f, h);
    write_le<uint8_t>(f, kind);
    write_le<double>(f, pitch);
}

struct RasterHeader {
    uint32_t width, height;
    uint8_t kind;
    double pitch;
};

inline RasterHeader read_header(std::FILE* f, const std::string& path) {
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4) throw IoError("truncated file: " + path);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic in " + path);
    const uint32_t version = read_le<uint32_t>(f, path);
    if (version != kVersion) throw FormatError("unsupported version in " + path);
    RasterHeader h;
    h.width = read_le<uint32_t>(f, path);
    h.height = read_le<uint32_t>(f, path);
    h.kind = read_le<uint8_t>(f, path);
    h.pitch = read_le<double>(f, path);
    if (h.width == 0 || h.height == 0 || h.kind > 1 || !(h.pitch > 0.0))
        throw FormatError("bad header in " + path);
    return h;
}

}  // namespace detail_io

inline void write_raster(const std::string& path, const Raster& r) {
    auto f = detail_io::open_file(path, "wb");
    detail_io::write_header(f.get(), r.width, r.height, 0, r.pitch);
    std::vector<float> data(r.v.size());
    for (size_t i = 0; i < r.v.size(); ++i) data[i] = static_cast<float>(r.v[i]);
    detail_io::write_f32_block(f.get(), data);
}

inline void write_field(const std::string& path, const ComplexField& c) {
    auto f = detail_io::open_file(path, "wb");
    detail_io::write_header(f.get(), c.width, c.height, 1, c.pitch);
    std::vector<float> data(c.v.size() * 2);
    for (size_t i = 0; i < c.v.size(); ++i) {
        data[2 * i] = static_cast<float>(c.v[i].real());
        data[2 * i + 1] = static_cast<float>(c.v[i].imag());
    }
    detail_io::write_f32_block(f.get(), data);
}

inline bool raster_file_is_complex(const std::string& path) {
    auto f = detail_io::open_file(path, "rb");
    return detail_io::read_header(f.get(), path).kind == 1;
}

inline Raster read_raster(const std::string& path) {
    auto f = detail_io::open_file(path, "rb");
    const auto h = detail_io::read_header(f.get(), path);
    if (h.kind != 0) throw FormatError(path + " holds a complex field, not a real raster");
    Raster r(h.width, h.height, h.pitch);
    auto data = detail_io::read_f32_block(f.get(), r.v.size(), path);
    for (size_t i = 0; i < r.v.size(); ++i) r.v[i] = data[i];
    return r;
}

inline ComplexField read_field(const std::string& path) {
    auto f = detail_io::open_file(path, "rb");
    const auto h = detail_io::read_header(f.get(), path);
    if (h.kind != 1) throw FormatError(path + " holds a real raster, not a complex field");
    ComplexField c(h.width, h.height, h.pitch);
    auto data = detail_io::read_f32_block(f.get(), c.v.size() * 2, path);
    for (size_t i = 0; i < c.v.size(); ++i) c.v[i] = {data[2 * i], data[2 * i + 1]};
    return c;
}

// ---------------------------------------------------------------------------
// 8/16-bit grayscale image files (PNG, PGM/PPM). Reads return values scaled to
// [0, 1]; color inputs are reduced with Rec.601 luma.
// ---------------------------------------------------------------------------

namespace detail_io {

inline Raster read_png(const std::string& path) {
    auto f = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw FormatError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<unsigned char> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG: " + path);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // libpng hands 16-bit big-endian
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    const size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Raster r(static_cast<int>(w), static_cast<int>(h));
    const bool wide = bit_depth == 16;
    const double scale = wide ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (png_uint_32 y = 0; y < h; ++y) {
        const unsigned char* row = buffer.data() + y * rowbytes;
        for (png_uint_32 x = 0; x < w; ++x) {
            double value;
            auto fetch = [&](int c) -> double {
                if (wide) {
                    uint16_t px;
                    std::memcpy(&px, row + (x * channels + c) * 2, 2);
                    return px;
                }
                return row[x * channels + c];
            };
            if (channels >= 3)
                value = 0.299 * fetch(0) + 0.587 * fetch(1) + 0.114 * fetch(2);
            else
                value = fetch(0);
            r.at(static_cast<int>(x), static_cast<int>(y)) = value * scale;
        }
    }
    return r;
}

inline void skip_pnm_space(std::FILE* f) {
    int c;
    while ((c = std::fgetc(f)) != EOF) {
        if (c == '#') {
            while ((c = std::fgetc(f)) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            std::ungetc(c, f);
            return;
        }
    }
}

inline long read_pnm_int(std::FILE* f, const std::string& path) {
    skip_pnm_space(f);
    long v = 0;
    int c = std::fgetc(f);
    if (c == EOF || !std::isdigit(c)) throw FormatError("bad PNM header in " + path);
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = std::fgetc(f);
    }
    return v;
}

inline Raster read_pnm(const std::string& path) {
    auto f = open_file(path, "rb");
    int m0 = std::fgetc(f.get()), m1 = std::fgetc(f.get());
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw FormatError("unsupported PNM type in " + path);
    const int channels = m1 == '6' ? 3 : 1;
    const long w = read_pnm_int(f.get(), path);
    const long h = read_pnm_int(f.get(), path);
    const long maxval = read_pnm_int(f.get(), path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError("bad PNM header in " + path);
    // read_pnm_int already consumed the single whitespace after maxval
    const bool wide = maxval > 255;
    const size_t n = static_cast<size_t>(w) * h * channels;
    std::vector<unsigned char> buf(n * (wide ? 2 : 1));
    if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
        throw IoError("truncated file: " + path);
    Raster r(static_cast<int>(w), static_cast<int>(h));
    const double scale = 1.0 / maxval;
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const size_t base = (static_cast<size_t>(y) * w + x) * channels;
            auto fetch = [&](size_t c) -> double {
                if (wide) return (buf[(base + c) * 2] << 8) | buf[(base + c) * 2 + 1];  // big-endian per netpbm
                return buf[base + c];
            };
            double value = channels == 3
                               ? 0.299 * fetch(0) + 0.587 * fetch(1) + 0.114 * fetch(2)
                               : fetch(0);
            r.at(static_cast<int>(x), static_cast<int>(y)) = value * scale;
        }
    }
    return r;
}

}  // namespace detail_io

/// Read a grayscale image (PNG/PGM/PPM or native .utr) into [0, 1] values.
inline Raster read_image(const std::string& path) {
    auto f = detail_io::open_file(path, "rb");
    unsigned char sig[4] = {0, 0, 0, 0};
    const size_t got = std::fread(sig, 1, 4, f.get());
    f.reset();
    if (got >= 4 && std::memcmp(sig, detail_io::kMagic, 4) == 0) return read_raster(path);
    if (got >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return detail_io::read_pnm(path);
    if (got >= 4 && png_sig_cmp(sig, 0, 4) == 0) return detail_io::read_png(path);
    throw FormatError("unrecognized image format: " + path);
}

/// Write [0, 1] data as 8- or 16-bit grayscale PNG (values clamped).
inline void write_png_gray(const std::string& path, const Raster& r, int bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16) throw ParamError("png bit depth must be 8 or 16");
    auto f = detail_io::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<unsigned char> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, r.width, r.height, bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const size_t bytes_per_px = bit_depth / 8;
    buffer.resize(static_cast<size_t>(r.width) * r.height * bytes_per_px);
    const double maxv = bit_depth == 8 ? 255.0 : 65535.0;
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            const double c = std::clamp(r.at(x, y), 0.0, 1.0) * maxv;
            const auto q = static_cast<uint32_t>(std::lround(c));
            unsigned char* px = buffer.data() + (static_cast<size_t>(y) * r.width + x) * bytes_per_px;
            if (bit_depth == 8) {
                px[0] = static_cast<unsigned char>(q);
            } else {
                px[0] = static_cast<unsigned char>(q >> 8);  // network order per PNG spec
                px[1] = static_cast<unsigned char>(q & 0xff);
            }
        }
    }
    rows.resize(r.height);
    for (int y = 0; y < r.height; ++y)
        rows[y] = buffer.data() + static_cast<size_t>(y) * r.width * bytes_per_px;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Write packed RGB8 pixels (3 bytes per pixel, row-major) as a color PNG.
inline void write_png_rgb8(const std::string& path, int width, int height,
                           const std::vector<unsigned char>& rgb) {
    if (width <= 0 || height <= 0 || rgb.size() != static_cast<size_t>(width) * height * 3)
        throw ShapeError("write_png_rgb8: buffer does not match dimensions");
    auto f = detail_io::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(rgb.data() + static_cast<size_t>(y) * width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace utir
