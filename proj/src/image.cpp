#include "fpdn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace fpdn {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

float round_half_up(float x) { return std::floor(x + 0.5f); }

}  // namespace

GrayImage normalize(const GrayImage& img) {
    require(img.domain == PixelDomain::Storage, "normalize: image already in compute domain");
    GrayImage out(img.height, img.width, PixelDomain::Compute);
    out.pixels = img.pixels / 255.0f;
    return out;
}

GrayImage denormalize(const GrayImage& img) {
    require(img.domain == PixelDomain::Compute, "denormalize: image already in storage domain");
    GrayImage out(img.height, img.width, PixelDomain::Storage);
    out.pixels = (img.pixels * 255.0f + 0.5f).floor().max(0.0f).min(255.0f);
    return out;
}

float sample_bilinear(const GrayImage& img, double y, double x) {
    const double cy = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const double cx = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const int y0 = static_cast<int>(std::floor(cy));
    const int x0 = static_cast<int>(std::floor(cx));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const double fy = cy - y0;
    const double fx = cx - x0;
    const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
    const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

GrayImage resize_bilinear(const GrayImage& img, int new_h, int new_w) {
    require(img.width > 0 && img.height > 0, "resize: empty source image");
    require(new_h > 0 && new_w > 0, "resize: empty target size");
    if (new_h == img.height && new_w == img.width) return img;

    GrayImage out(new_h, new_w, img.domain);
    const double scale_y = static_cast<double>(img.height) / new_h;
    const double scale_x = static_cast<double>(img.width) / new_w;
    for (int y = 0; y < new_h; ++y) {
        const double sy = (y + 0.5) * scale_y - 0.5;
        for (int x = 0; x < new_w; ++x) {
            const double sx = (x + 0.5) * scale_x - 0.5;
            out.at(y, x) = sample_bilinear(img, sy, sx);
        }
    }
    return out;
}

std::pair<GrayImage, ResizeRecord> resize_to_multiple16(const GrayImage& img) {
    require(img.domain == PixelDomain::Compute, "resize_to_multiple16: expects compute domain");
    require(img.width > 0 && img.height > 0, "resize_to_multiple16: empty image");
    ResizeRecord record;
    record.original_h = img.height;
    record.original_w = img.width;
    record.resized_h = 16 * ((img.height + 15) / 16);
    record.resized_w = 16 * ((img.width + 15) / 16);
    return {resize_bilinear(img, record.resized_h, record.resized_w), record};
}

GrayImage postprocess(const Tensor<float>& output, const ResizeRecord& record) {
    require(output.rank() == 4 && output.dim(0) == 1 && output.dim(1) == 1,
            "postprocess: expected a (1,1,H,W) single-channel output, got " +
                shape_string(output));
    const int h = static_cast<int>(output.dim(2));
    const int w = static_cast<int>(output.dim(3));

    GrayImage scaled(h, w, PixelDomain::Storage);
    const double lo = output.array().minCoeff();
    const double hi = output.array().maxCoeff();
    if (hi > lo) {
        for (Eigen::Index i = 0; i < scaled.size(); ++i)
            scaled.pixels[i] = static_cast<float>(
                std::floor((output[i] - lo) / (hi - lo) * 255.0 + 0.5));
    }  // constant output stays all zeros

    GrayImage resized = resize_bilinear(scaled, record.original_h, record.original_w);
    resized.pixels = (resized.pixels + 0.5f).floor().max(0.0f).min(255.0f);
    return resized;
}

std::pair<GrayImage, ResizeRecord> pad_to_multiple16(const GrayImage& img) {
    require(img.domain == PixelDomain::Compute, "pad_to_multiple16: expects compute domain");
    require(img.width > 0 && img.height > 0, "pad_to_multiple16: empty image");
    ResizeRecord record;
    record.original_h = img.height;
    record.original_w = img.width;
    record.resized_h = 16 * ((img.height + 15) / 16);
    record.resized_w = 16 * ((img.width + 15) / 16);

    GrayImage out(record.resized_h, record.resized_w, PixelDomain::Compute, 1.0f);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(y, x) = img.at(y, x);
    return {std::move(out), record};
}

GrayImage postprocess_padded(const Tensor<float>& output, const ResizeRecord& record) {
    GrayImage scaled = postprocess(output, ResizeRecord{static_cast<int>(output.dim(2)),
                                                        static_cast<int>(output.dim(3)),
                                                        static_cast<int>(output.dim(2)),
                                                        static_cast<int>(output.dim(3))});
    GrayImage out(record.original_h, record.original_w, PixelDomain::Storage);
    for (int y = 0; y < record.original_h; ++y)
        for (int x = 0; x < record.original_w; ++x) out.at(y, x) = scaled.at(y, x);
    return out;
}

GrayImage warp_affine(const GrayImage& img, const Eigen::Matrix3d& inverse_map, float fill) {
    GrayImage out(img.height, img.width, img.domain);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double sx = inverse_map(0, 0) * x + inverse_map(0, 1) * y + inverse_map(0, 2);
            const double sy = inverse_map(1, 0) * x + inverse_map(1, 1) * y + inverse_map(1, 2);
            out.at(y, x) = (sx < 0.0 || sx > img.width - 1 || sy < 0.0 || sy > img.height - 1)
                               ? fill
                               : sample_bilinear(img, sy, sx);
        }
    }
    return out;
}

Tensor<float> image_to_tensor(const GrayImage& img) {
    require(img.domain == PixelDomain::Compute, "image_to_tensor: expects compute domain");
    Tensor<float> t({1, 1, img.height, img.width});
    std::copy(img.pixels.data(), img.pixels.data() + img.size(), t.data());
    return t;
}

GrayImage tensor_to_image(const Tensor<float>& t) {
    require(t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1,
            "tensor_to_image: expected (1,1,H,W), got " + shape_string(t));
    GrayImage img(static_cast<int>(t.dim(2)), static_cast<int>(t.dim(3)), PixelDomain::Compute);
    std::copy(t.data(), t.data() + t.size(), img.pixels.data());
    return img;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};

GrayImage read_png(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image file: " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw std::runtime_error("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng initialization failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("corrupt PNG file: " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // fold every input layout down to 8-bit grayscale
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    std::vector<png_byte> row(png_get_rowbytes(png, info));

    GrayImage img(height, width, PixelDomain::Storage);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x) img.at(y, x) = static_cast<float>(row[static_cast<size_t>(x)]);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::string& path, const GrayImage& img) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write image file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng initialization failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            row[static_cast<size_t>(x)] = static_cast<png_byte>(
                std::clamp(img.at(y, x), 0.0f, 255.0f));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image file: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("not a binary PGM (P5) file: " + path);

    auto next_token = [&in, &path]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') { std::string rest; std::getline(in, rest); continue; }
            return tok;
        }
        throw std::runtime_error("truncated PGM header: " + path);
    };
    const int width = std::stoi(next_token());
    const int height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
        throw std::runtime_error("unsupported PGM header in " + path);
    in.get();  // the single whitespace after maxval

    std::vector<unsigned char> buf(static_cast<size_t>(width) * height);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
        throw std::runtime_error("truncated PGM data: " + path);

    GrayImage img(height, width, PixelDomain::Storage);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.pixels[i] = static_cast<float>(buf[static_cast<size_t>(i)]);
    return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image file: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> buf(static_cast<size_t>(img.width) * img.height);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        buf[static_cast<size_t>(i)] = static_cast<unsigned char>(std::clamp(img.pixels[i], 0.0f, 255.0f));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

}  // namespace

GrayImage read_image(const std::string& path) {
    if (ends_with(path, ".pgm") || ends_with(path, ".PGM")) return read_pgm(path);
    return read_png(path);
}

void write_image(const std::string& path, const GrayImage& img) {
    require(img.domain == PixelDomain::Storage, "write_image: expects storage domain");
    require(img.width > 0 && img.height > 0, "write_image: empty image");
    if (ends_with(path, ".pgm") || ends_with(path, ".PGM")) write_pgm(path, img);
    else write_png(path, img);
}

}  // namespace fpdn
