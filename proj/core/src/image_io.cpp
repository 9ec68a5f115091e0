#include "ourgan/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace ourgan {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    std::string tail = s.substr(s.size() - suffix.size());
    std::transform(tail.begin(), tail.end(), tail.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return tail == suffix;
}

ImageTensor from_rgb_rows(const std::vector<std::vector<uint8_t>>& rows, int64_t h, int64_t w,
                          int bytes_per_sample) {
    ImageTensor img({3, h, w});
    const float maxval = bytes_per_sample == 2 ? 65535.0f : 255.0f;
    for (int64_t y = 0; y < h; ++y) {
        const uint8_t* row = rows[static_cast<size_t>(y)].data();
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                const uint8_t* p = row + (x * 3 + c) * bytes_per_sample;
                // PNG stores 16-bit samples big-endian.
                float v = bytes_per_sample == 2
                              ? static_cast<float>((p[0] << 8) | p[1])
                              : static_cast<float>(p[0]);
                img.at(c, y, x) = v / maxval * 2.0f - 1.0f;
            }
        }
    }
    return img;
}

ImageTensor load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    check(fp != nullptr, "load_image: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "load_image: png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("load_image: png info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("load_image: failed to decode " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int64_t w = png_get_image_width(png, info);
    const int64_t h = png_get_image_height(png, info);
    const int bytes_per_sample = png_get_bit_depth(png, info) == 16 ? 2 : 1;
    const size_t rowbytes = png_get_rowbytes(png, info);

    std::vector<std::vector<uint8_t>> rows(static_cast<size_t>(h));
    std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
    for (int64_t y = 0; y < h; ++y) {
        rows[static_cast<size_t>(y)].resize(rowbytes);
        row_ptrs[static_cast<size_t>(y)] = rows[static_cast<size_t>(y)].data();
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    return from_rgb_rows(rows, h, w, bytes_per_sample);
}

ImageTensor load_jpeg(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    check(fp != nullptr, "load_image: cannot open " + path);

    jpeg_decompress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jerr.error_exit = [](j_common_ptr info) {
        char msg[JMSG_LENGTH_MAX];
        (*info->err->format_message)(info, msg);
        throw Error(std::string("load_image: jpeg error: ") + msg);
    };
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const int64_t w = cinfo.output_width, h = cinfo.output_height;
    std::vector<std::vector<uint8_t>> rows(static_cast<size_t>(h));
    const size_t rowbytes = static_cast<size_t>(w) * 3;
    while (cinfo.output_scanline < cinfo.output_height) {
        auto& row = rows[cinfo.output_scanline];
        row.resize(rowbytes);
        uint8_t* ptr = row.data();
        jpeg_read_scanlines(&cinfo, &ptr, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    return from_rgb_rows(rows, h, w, 1);
}

}  // namespace

ImageTensor load_image(const std::string& path) {
    if (has_suffix(path, ".png")) return load_png(path);
    if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) return load_jpeg(path);
    throw Error("load_image: unsupported format (expected .png/.jpg/.jpeg): " + path);
}

void save_image(const std::string& path, const ImageTensor& image, PngBitDepth depth) {
    check(is_image(image), "save_image: expected a 3xHxW image");
    check(has_suffix(path, ".png"), "save_image: PNG is the only output format: " + path);

    const int64_t h = image_height(image), w = image_width(image);
    const int bit_depth = depth == PngBitDepth::Bits16 ? 16 : 8;
    const float maxval = depth == PngBitDepth::Bits16 ? 65535.0f : 255.0f;

    std::vector<std::vector<uint8_t>> rows(static_cast<size_t>(h));
    for (int64_t y = 0; y < h; ++y) {
        auto& row = rows[static_cast<size_t>(y)];
        row.resize(static_cast<size_t>(w) * 3 * (bit_depth / 8));
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                float v = std::min(1.0f, std::max(-1.0f, image.at(c, y, x)));
                auto q = static_cast<uint32_t>(std::lround((v + 1.0f) * 0.5f * maxval));
                uint8_t* p = row.data() + (x * 3 + c) * (bit_depth / 8);
                if (bit_depth == 16) {
                    p[0] = static_cast<uint8_t>(q >> 8);
                    p[1] = static_cast<uint8_t>(q & 0xff);
                } else {
                    p[0] = static_cast<uint8_t>(q);
                }
            }
        }
    }

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    check(fp != nullptr, "save_image: cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "save_image: png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("save_image: png info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("save_image: failed to encode " + path);
    }
    png_init_io(png, fp.get());
    // Fixed settings keep identical tensors byte-identical on disk.
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int64_t y = 0; y < h; ++y) png_write_row(png, rows[static_cast<size_t>(y)].data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace ourgan
