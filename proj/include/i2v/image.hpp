#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "i2v/tensor.hpp"

namespace i2v {

/// RGB frame with planar float pixels in [0, 1], shape (3, H, W).
class FrameImage {
public:
    FrameImage() = default;
    FrameImage(int height, int width, float fill = 0.0f) : pixels_({3, height, width}, fill) {}
    explicit FrameImage(Tensor<float> pixels);

    int height() const { return pixels_.rank() == 3 ? pixels_.dim(1) : 0; }
    int width() const { return pixels_.rank() == 3 ? pixels_.dim(2) : 0; }
    bool empty() const { return pixels_.empty(); }

    float& at(int c, int y, int x) { return pixels_.at(c, y, x); }
    float at(int c, int y, int x) const { return pixels_.at(c, y, x); }

    const Tensor<float>& tensor() const { return pixels_; }
    Tensor<float>& tensor() { return pixels_; }

    bool operator==(const FrameImage&) const = default;

private:
    Tensor<float> pixels_;
};

// 8-bit codec. Grayscale and gray+alpha inputs are replicated to three
// channels; alpha is dropped.
FrameImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const FrameImage& image);
FrameImage load_png(const std::filesystem::path& path);
void save_png(const FrameImage& image, const std::filesystem::path& path);

// Round-trips pixel values through the 8-bit representation used on disk.
FrameImage quantize8(const FrameImage& image);

FrameImage resize_bilinear(const FrameImage& image, int height, int width);
FrameImage crop(const FrameImage& image, int top, int left, int height, int width);
// Center square crop followed by a resize to size x size.
FrameImage center_square(const FrameImage& image, int size);

}  // namespace i2v
