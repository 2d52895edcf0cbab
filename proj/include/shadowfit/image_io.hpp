#pragma once

#include "shadowfit/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

namespace shadowfit {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline Image<std::uint16_t> read_png_gray16(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw io_error("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw io_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw io_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw io_error("failed to decode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 16) {
        // scale 8-bit samples to the full 16-bit range
        png_set_expand_16(png);
    }
    png_set_swap(png);  // little-endian samples in memory
    png_read_update_info(png, info);
    Image<std::uint16_t> img(static_cast<int>(w), static_cast<int>(h));
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(&img.at(0, static_cast<int>(y)));
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png_gray(const std::string& path, const std::uint8_t* data8,
                           const std::uint16_t* data16, int w, int h) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw io_error("cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw io_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw io_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw io_error("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    const int depth = data16 ? 16 : 8;
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (data16) png_set_swap(png);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        rows[static_cast<std::size_t>(y)] =
            data16 ? reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(data16 + static_cast<std::size_t>(y) * w))
                   : const_cast<png_bytep>(data8 + static_cast<std::size_t>(y) * w);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline bool has_ext(const std::string& path, const char* ext) {
    const auto e = std::filesystem::path(path).extension().string();
    return e == ext;
}

inline Image<std::uint16_t> read_pgm_gray16(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw io_error(path + ": unsupported PGM magic \"" + magic + "\"");
    auto next_token = [&f, &path]() -> long {
        long v = -1;
        while (f) {
            f >> std::ws;
            if (f.peek() == '#') {
                std::string line;
                std::getline(f, line);
                continue;
            }
            if (!(f >> v)) break;
            return v;
        }
        throw io_error(path + ": truncated PGM header");
    };
    const long w = next_token(), h = next_token(), maxval = next_token();
    if (w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
        throw io_error(path + ": unsupported PGM geometry or maxval");
    f.get();  // single whitespace after maxval
    Image<std::uint16_t> img(static_cast<int>(w), static_cast<int>(h));
    if (maxval == 255) {
        std::vector<std::uint8_t> raw(img.size());
        f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!f) throw io_error(path + ": truncated PGM payload");
        for (std::size_t i = 0; i < raw.size(); ++i)
            img.data[i] = static_cast<std::uint16_t>(raw[i] * 257);  // replicate to 16-bit
    } else {
        std::vector<std::uint8_t> raw(img.size() * 2);
        f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!f) throw io_error(path + ": truncated PGM payload");
        for (std::size_t i = 0; i < img.size(); ++i)
            img.data[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return img;
}

inline void write_pgm_gray(const std::string& path, const std::uint8_t* data8,
                           const std::uint16_t* data16, int w, int h) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open " + path + " for writing");
    f << "P5\n" << w << " " << h << "\n" << (data16 ? 65535 : 255) << "\n";
    if (data16) {
        std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 2);
        for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
            raw[2 * i] = static_cast<std::uint8_t>(data16[i] >> 8);
            raw[2 * i + 1] = static_cast<std::uint8_t>(data16[i] & 0xff);
        }
        f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    } else {
        f.write(reinterpret_cast<const char*>(data8), static_cast<std::streamsize>(w) * h);
    }
    if (!f) throw io_error("failed writing " + path);
}

inline Image<std::uint16_t> read_gray16(const std::string& path) {
    if (has_ext(path, ".pgm")) return read_pgm_gray16(path);
    if (has_ext(path, ".png")) return read_png_gray16(path);
    throw io_error(path + ": unsupported image extension (want .png or .pgm)");
}

}  // namespace detail

// Grayscale image as [0, 1] intensities; accepts 8/16-bit PNG or P5 PGM.
inline Image<double> read_gray_image(const std::string& path) {
    const auto raw = detail::read_gray16(path);
    Image<double> img(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw.data[i] / 65535.0;
    return img;
}

// Binary mask: pixels at or above threshold (in [0, 1] intensity) become 1.
inline ShadowMask read_mask(const std::string& path, double threshold = 0.5) {
    const auto g = read_gray_image(path);
    ShadowMask m(g.width, g.height);
    for (std::size_t i = 0; i < g.size(); ++i) m.data[i] = g.data[i] >= threshold ? 1 : 0;
    return m;
}

inline void write_mask(const std::string& path, const ShadowMask& mask) {
    std::vector<std::uint8_t> bytes(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
    if (detail::has_ext(path, ".pgm"))
        detail::write_pgm_gray(path, bytes.data(), nullptr, mask.width, mask.height);
    else if (detail::has_ext(path, ".png"))
        detail::write_png_gray(path, bytes.data(), nullptr, mask.width, mask.height);
    else
        throw io_error(path + ": unsupported image extension (want .png or .pgm)");
}

// 16-bit grayscale; values are clamped to [0, 1] then quantized.
inline void write_soft(const std::string& path, const SoftMask& soft) {
    std::vector<std::uint16_t> q(soft.size());
    for (std::size_t i = 0; i < soft.size(); ++i) {
        const double v = std::clamp(soft.data[i], 0.0, 1.0);
        q[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
    if (detail::has_ext(path, ".pgm"))
        detail::write_pgm_gray(path, nullptr, q.data(), soft.width, soft.height);
    else if (detail::has_ext(path, ".png"))
        detail::write_png_gray(path, nullptr, q.data(), soft.width, soft.height);
    else
        throw io_error(path + ": unsupported image extension (want .png or .pgm)");
}

}  // namespace shadowfit
