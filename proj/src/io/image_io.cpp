#include "monoview/io/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "monoview/error.hpp"

namespace monoview::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

Image8 read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    require(fp != nullptr, "cannot open image " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "libpng read-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("libpng info-struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("failed to decode PNG " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    // normalize everything to 8-bit RGB
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    Image8 img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = 3;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);

    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::string& path, const Image8& image) {
    require(image.channels == 1 || image.channels == 3,
            "write_png: channels must be 1 or 3");
    require(image.pixels.size() == static_cast<std::size_t>(image.width) *
                                       image.height * image.channels,
            "write_png: pixel buffer size mismatch");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    require(fp != nullptr, "cannot write image " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "libpng write-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("libpng info-struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("failed to encode PNG " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_const_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y)
        rows[y] = image.pixels.data() +
                  static_cast<std::size_t>(y) * image.width * image.channels;
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_pfm(const std::string& path, const Tensorf& map) {
    require(map.n() == 1 && map.c() == 1, "write_pfm: map must be (1,H,W,1)");
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot write " + path);
    f << "Pf\n" << map.w() << " " << map.h() << "\n-1.0\n"; // negative scale: little-endian
    for (int y = map.h() - 1; y >= 0; --y)                  // bottom-up scanlines
        f.write(reinterpret_cast<const char*>(map.data() + map.idx(0, y, 0, 0)),
                static_cast<std::streamsize>(map.w() * sizeof(float)));
    require(f.good(), "short write to " + path);
}

Tensorf read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    f >> magic >> w >> h >> scale;
    require(magic == "Pf", path + ": only grayscale PFM is supported");
    require(w > 0 && h > 0, path + ": bad dimensions");
    require(scale < 0, path + ": big-endian PFM is unsupported");
    f.get(); // single whitespace after the header
    Tensorf map(1, h, w, 1);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(map.data() + map.idx(0, y, 0, 0)),
               static_cast<std::streamsize>(w * sizeof(float)));
        require(f.good(), path + ": truncated PFM data");
    }
    return map;
}

Image8 map_to_gray8(const Tensorf& map, float lo, float hi) {
    require(map.n() == 1 && map.c() == 1, "map_to_gray8: map must be (1,H,W,1)");
    require(hi > lo, "map_to_gray8: empty value range");
    Image8 img;
    img.width = map.w();
    img.height = map.h();
    img.channels = 1;
    img.pixels.resize(static_cast<std::size_t>(map.size()));
    const float s = 255.0f / (hi - lo);
    for (std::int64_t i = 0; i < map.size(); ++i) {
        float v = (map[i] - lo) * s;
        v = std::min(255.0f, std::max(0.0f, std::round(v)));
        img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
    }
    return img;
}

} // namespace monoview::io
