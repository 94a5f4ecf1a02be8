#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>

#include "fpdn/tensor.hpp"

namespace fpdn {

// Which value domain a grayscale image is in. Storage holds 8-bit intensities
// as whole numbers in [0,255]; Compute holds unit-interval reals. The tag only
// flips through normalize / denormalize.
enum class PixelDomain { Storage, Compute };

struct GrayImage {
    int width = 0;
    int height = 0;
    PixelDomain domain = PixelDomain::Storage;
    Eigen::ArrayXf pixels;  // row-major scanlines, height*width entries

    GrayImage() = default;
    GrayImage(int h, int w, PixelDomain d, float fill = 0.0f)
        : width(w), height(h), domain(d), pixels(Eigen::ArrayXf::Constant(h * w, fill)) {}

    float& at(int y, int x) { return pixels[y * width + x]; }
    float at(int y, int x) const { return pixels[y * width + x]; }
    Eigen::Index size() const { return pixels.size(); }
};

struct ResizeRecord {
    int original_h = 0;
    int original_w = 0;
    int resized_h = 0;
    int resized_w = 0;
};

GrayImage normalize(const GrayImage& img);    // storage -> compute, /255
GrayImage denormalize(const GrayImage& img);  // compute -> storage, x255 rounded half-up

// Bilinear resize with half-pixel-center coordinates and clamped edges.
GrayImage resize_bilinear(const GrayImage& img, int new_h, int new_w);

// Resize up to the smallest dims divisible by 16 (identity when already so).
std::pair<GrayImage, ResizeRecord> resize_to_multiple16(const GrayImage& img);

// Min-max scale a single-channel model output to 0-255 (constant maps to all
// zeros), round half-up, then resize back to the recorded original dims.
GrayImage postprocess(const Tensor<float>& output, const ResizeRecord& record);

// Alternative grid alignment: white-pad at the bottom/right instead of
// resizing, and crop (not resize) on the way back.
std::pair<GrayImage, ResizeRecord> pad_to_multiple16(const GrayImage& img);
GrayImage postprocess_padded(const Tensor<float>& output, const ResizeRecord& record);

// Clamped bilinear sample at real coordinates (y, x) in pixel-center units.
float sample_bilinear(const GrayImage& img, double y, double x);

// Inverse-mapped affine warp: for each output pixel, inverse_map * (x,y,1)
// gives the source position; samples bilinearly, out-of-frame gives `fill`.
GrayImage warp_affine(const GrayImage& img, const Eigen::Matrix3d& inverse_map, float fill);

// A degraded/clean training pair sharing dimensions and a provenance seed.
struct ImagePair {
    GrayImage degraded;
    GrayImage clean;
    uint64_t seed = 0;
    std::string id;
};

Tensor<float> image_to_tensor(const GrayImage& img);          // compute domain -> (1,1,H,W)
GrayImage tensor_to_image(const Tensor<float>& t);            // (1,1,H,W) -> compute domain

// 8-bit grayscale PNG plus binary PGM (P5); format picked by file extension.
GrayImage read_image(const std::string& path);
void write_image(const std::string& path, const GrayImage& img);

}  // namespace fpdn
