#include "i2v/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "i2v/error.hpp"

namespace i2v {

FrameImage::FrameImage(Tensor<float> pixels) : pixels_(std::move(pixels)) {
    if (pixels_.rank() != 3 || pixels_.dim(0) != 3) throw Error("frame image must have shape (3, H, W)");
}

FrameImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw Error(std::string("png decode failed: ") + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error(std::string("png decode failed: ") + img.message);
    }
    const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
    FrameImage out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(c, y, x) = buf[(std::size_t(y) * w + x) * 3 + c] / 255.0f;
    return out;
}

namespace {
std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}
}  // namespace

std::vector<std::uint8_t> encode_png(const FrameImage& image) {
    const int h = image.height(), w = image.width();
    std::vector<std::uint8_t> rgb(std::size_t(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) rgb[(std::size_t(y) * w + x) * 3 + c] = to_byte(image.at(c, y, x));
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr))
        throw Error(std::string("png encode failed: ") + img.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, rgb.data(), 0, nullptr))
        throw Error(std::string("png encode failed: ") + img.message);
    out.resize(size);
    return out;
}

FrameImage load_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

void save_png(const FrameImage& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write image " + path.string());
}

FrameImage quantize8(const FrameImage& image) {
    FrameImage out = image;
    for (auto& v : out.tensor().storage()) v = to_byte(v) / 255.0f;
    return out;
}

FrameImage resize_bilinear(const FrameImage& image, int height, int width) {
    if (height <= 0 || width <= 0) throw Error("resize to an empty image");
    const int sh = image.height(), sw = image.width();
    if (sh == height && sw == width) return image;
    FrameImage out(height, width);
    const double fy = double(sh) / height, fx = double(sw) / width;
    for (int y = 0; y < height; ++y) {
        const double syf = std::clamp((y + 0.5) * fy - 0.5, 0.0, double(sh - 1));
        const int y0 = static_cast<int>(std::floor(syf));
        const int y1 = std::min(y0 + 1, sh - 1);
        const double wy = syf - y0;
        for (int x = 0; x < width; ++x) {
            const double sxf = std::clamp((x + 0.5) * fx - 0.5, 0.0, double(sw - 1));
            const int x0 = static_cast<int>(std::floor(sxf));
            const int x1 = std::min(x0 + 1, sw - 1);
            const double wx = sxf - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
                const double bot = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
                out.at(c, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

FrameImage crop(const FrameImage& image, int top, int left, int height, int width) {
    if (top < 0 || left < 0 || top + height > image.height() || left + width > image.width())
        throw Error("crop window outside image");
    FrameImage out(height, width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, top + y, left + x);
    return out;
}

FrameImage center_square(const FrameImage& image, int size) {
    const int side = std::min(image.height(), image.width());
    const FrameImage sq = crop(image, (image.height() - side) / 2, (image.width() - side) / 2, side, side);
    return resize_bilinear(sq, size, size);
}

}  // namespace i2v
