#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fpdn/image.hpp"
#include "fpdn/rng.hpp"

using namespace fpdn;
namespace fs = std::filesystem;

namespace {

GrayImage random_storage_image(int h, int w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    GrayImage img(h, w, PixelDomain::Storage);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        img.pixels[i] = static_cast<float>(uniform_int(rng, 0, 255));
    return img;
}

}  // namespace

TEST_CASE("normalize divides by 255 and flips the domain tag") {
    GrayImage img(1, 4, PixelDomain::Storage);
    img.pixels << 0, 255, 51, 128;
    auto out = normalize(img);
    CHECK(out.domain == PixelDomain::Compute);
    CHECK(out.pixels[0] == 0.0f);
    CHECK(out.pixels[1] == 1.0f);
    CHECK(out.pixels[2] == doctest::Approx(0.2f));
    CHECK(out.pixels[3] == doctest::Approx(128.0f / 255.0f));
    CHECK_THROWS_AS(normalize(out), std::invalid_argument);
}

TEST_CASE("normalize then denormalize is the identity on storage images") {
    auto img = random_storage_image(13, 17, 42);
    auto round_trip = denormalize(normalize(img));
    REQUIRE(round_trip.domain == PixelDomain::Storage);
    for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(round_trip.pixels[i] == img.pixels[i]);
}

TEST_CASE("resize_to_multiple16 rounds dims up to the next multiple of 16") {
    SUBCASE("competition-sized image") {
        GrayImage img(200, 400, PixelDomain::Compute, 0.5f);
        auto [resized, record] = resize_to_multiple16(img);
        CHECK(resized.height == 208);
        CHECK(resized.width == 400);
        CHECK(record.original_h == 200);
        CHECK(record.original_w == 400);
        CHECK(record.resized_h == 208);
        CHECK(record.resized_w == 400);
    }
    SUBCASE("already divisible: identity") {
        GrayImage img(16, 32, PixelDomain::Compute, 0.25f);
        auto [resized, record] = resize_to_multiple16(img);
        CHECK(resized.height == 16);
        CHECK(resized.width == 32);
        for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(resized.pixels[i] == img.pixels[i]);
    }
    SUBCASE("minimal 1x1") {
        GrayImage img(1, 1, PixelDomain::Compute, 0.7f);
        auto [resized, record] = resize_to_multiple16(img);
        CHECK(resized.height == 16);
        CHECK(resized.width == 16);
        for (Eigen::Index i = 0; i < resized.size(); ++i)
            CHECK(resized.pixels[i] == doctest::Approx(0.7f));
    }
    SUBCASE("always divisible and within 15 of the original") {
        std::mt19937_64 rng(7);
        for (int t = 0; t < 30; ++t) {
            const int h = uniform_int(rng, 1, 333);
            const int w = uniform_int(rng, 1, 333);
            GrayImage img(h, w, PixelDomain::Compute, 0.1f);
            auto [resized, record] = resize_to_multiple16(img);
            CHECK(resized.height % 16 == 0);
            CHECK(resized.width % 16 == 0);
            CHECK(resized.height >= h);
            CHECK(resized.width >= w);
            CHECK(resized.height - h <= 15);
            CHECK(resized.width - w <= 15);
        }
    }
}

TEST_CASE("postprocess min-max scales to 0-255 with half-up rounding") {
    SUBCASE("span endpoints map to 0 and 255") {
        auto out = Tensor<float>::from_values({1, 1, 1, 3}, {0.2f, 0.45f, 0.7f});
        ResizeRecord rec{1, 3, 1, 3};
        auto img = postprocess(out, rec);
        CHECK(img.domain == PixelDomain::Storage);
        CHECK(img.pixels[0] == 0.0f);
        CHECK(img.pixels[2] == 255.0f);
    }
    SUBCASE("exact midpoint rounds half-up") {
        // 0.25 over a [0, 0.5] span hits 127.5 exactly (all three values are
        // exactly representable); half-up takes it to 128
        auto out = Tensor<float>::from_values({1, 1, 1, 3}, {0.0f, 0.25f, 0.5f});
        ResizeRecord rec{1, 3, 1, 3};
        auto img = postprocess(out, rec);
        CHECK(img.pixels[0] == 0.0f);
        CHECK(img.pixels[1] == 128.0f);
        CHECK(img.pixels[2] == 255.0f);
    }
    SUBCASE("already spanning [0,1]: a plain x255") {
        auto out = Tensor<float>::from_values({1, 1, 2, 2}, {0.0f, 1.0f, 0.4f, 0.8f});
        ResizeRecord rec{2, 2, 2, 2};
        auto img = postprocess(out, rec);
        CHECK(img.pixels[0] == 0.0f);
        CHECK(img.pixels[1] == 255.0f);
        CHECK(img.pixels[2] == 102.0f);
        CHECK(img.pixels[3] == 204.0f);
    }
    SUBCASE("constant output maps to all zeros") {
        auto out = Tensor<float>::full({1, 1, 4, 4}, 0.37f);
        ResizeRecord rec{4, 4, 4, 4};
        auto img = postprocess(out, rec);
        for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(img.pixels[i] == 0.0f);
    }
    SUBCASE("output always lands in [0,255], resize included") {
        std::mt19937_64 rng(11);
        Tensor<float> out({1, 1, 32, 32});
        for (Eigen::Index i = 0; i < out.size(); ++i)
            out[i] = static_cast<float>(uniform(rng, -3.0, 5.0));
        ResizeRecord rec{25, 27, 32, 32};
        auto img = postprocess(out, rec);
        CHECK(img.height == 25);
        CHECK(img.width == 27);
        CHECK(img.pixels.minCoeff() >= 0.0f);
        CHECK(img.pixels.maxCoeff() <= 255.0f);
    }
}

TEST_CASE("bilinear resize is exact on constants and rejects empty targets") {
    GrayImage img(10, 10, PixelDomain::Compute, 0.42f);
    auto up = resize_bilinear(img, 23, 31);
    for (Eigen::Index i = 0; i < up.size(); ++i) CHECK(up.pixels[i] == doctest::Approx(0.42f));
    CHECK_THROWS_AS(resize_bilinear(img, 0, 5), std::invalid_argument);

    GrayImage empty;
    CHECK_THROWS_AS(resize_to_multiple16(empty), std::invalid_argument);
}

TEST_CASE("image/tensor round trip preserves values") {
    GrayImage img(5, 7, PixelDomain::Compute);
    std::mt19937_64 rng(3);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.pixels[i] = static_cast<float>(uniform01(rng));
    auto t = image_to_tensor(img);
    REQUIRE(t.shape() == std::vector<Index>{1, 1, 5, 7});
    auto back = tensor_to_image(t);
    for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(back.pixels[i] == img.pixels[i]);
}

TEST_CASE("PNG write/read round trip, deterministic bytes") {
    const auto dir = fs::temp_directory_path();
    const auto path_a = dir / "fpdn_img_a.png";
    const auto path_b = dir / "fpdn_img_b.png";
    auto img = random_storage_image(21, 34, 99);

    write_image(path_a.string(), img);
    write_image(path_b.string(), img);

    auto read_back = read_image(path_a.string());
    REQUIRE(read_back.width == img.width);
    REQUIRE(read_back.height == img.height);
    for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(read_back.pixels[i] == img.pixels[i]);

    std::ifstream fa(path_a, std::ios::binary), fb(path_b, std::ios::binary);
    std::string a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(a == b);
    fs::remove(path_a);
    fs::remove(path_b);
}

TEST_CASE("PGM write/read round trip") {
    const auto path = fs::temp_directory_path() / "fpdn_img.pgm";
    auto img = random_storage_image(9, 12, 123);
    write_image(path.string(), img);
    auto back = read_image(path.string());
    REQUIRE(back.width == 12);
    REQUIRE(back.height == 9);
    for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(back.pixels[i] == img.pixels[i]);
    fs::remove(path);
}

TEST_CASE("reading a missing file fails with the path in the message") {
    CHECK_THROWS_WITH_AS(read_image("/nonexistent/nope.png"), doctest::Contains("nope.png"),
                         std::runtime_error);
}
