#include <doctest.h>

#include "pmem/feature.hpp"
#include "pmem/random.hpp"

#include <algorithm>
#include <cmath>

using namespace pmem;

namespace {

RgbdFrame random_frame(Rng& rng, int w, int h) {
    RgbdFrame f(w, h);
    for (float& v : f.rgb) v = static_cast<float>(rng.uniform());
    return f;
}

RgbdFrame constant_frame(int w, int h, float r, float g, float b) {
    RgbdFrame f(w, h);
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        f.rgb[3 * i] = r;
        f.rgb[3 * i + 1] = g;
        f.rgb[3 * i + 2] = b;
    }
    return f;
}

}  // namespace

TEST_CASE("constant frames") {
    const RgbdFrame f = constant_frame(16, 16, 0.2f, 0.4f, 0.6f);
    const FeatureMap fm = extract_features(f, 8);
    CHECK(fm.rows == 2);
    CHECK(fm.cols == 2);
    CHECK(fm.dim == kHandcraftedFeatureDim);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            const auto v = fm.at(r, c);
            CHECK(v[0] == static_cast<double>(0.2f));
            CHECK(v[1] == static_cast<double>(0.4f));
            CHECK(v[2] == static_cast<double>(0.6f));
            for (int k = 3; k < 12; ++k) CHECK(v[static_cast<std::size_t>(k)] == 0.0);
            const auto rgb = decode_color(v);
            CHECK(rgb[0] == static_cast<double>(0.2f));
            CHECK(rgb[1] == static_cast<double>(0.4f));
            CHECK(rgb[2] == static_cast<double>(0.6f));
        }
}

TEST_CASE("hand 2x2 patch") {
    RgbdFrame f(2, 2);
    f.color(0, 0, 0) = 0.0f;
    f.color(1, 0, 0) = 1.0f;
    f.color(0, 1, 0) = 0.0f;
    f.color(1, 1, 0) = 1.0f;
    const FeatureMap fm = extract_features(f, 2);
    const auto v = fm.at(0, 0);
    CHECK(v[0] == 0.5);
    CHECK(v[3] == 0.5);   // population std
    CHECK(v[6] == 1.0);   // every horizontal neighbour pair differs by 1
    CHECK(v[9] == 0.0);   // columns are constant
    CHECK(v[1] == 0.0);
}

TEST_CASE("patch must divide the frame") {
    CHECK_THROWS_AS(extract_features(RgbdFrame(10, 8), 4), std::invalid_argument);
    CHECK_THROWS_AS(extract_features(RgbdFrame(8, 8), 0), std::invalid_argument);
}

TEST_CASE("moments are invariant to pixel permutation within a patch") {
    Rng rng(4);
    const RgbdFrame f = random_frame(rng, 16, 16);
    RgbdFrame g = f;
    // reverse the pixel order inside every 8x8 patch
    for (int pr = 0; pr < 2; ++pr)
        for (int pc = 0; pc < 2; ++pc)
            for (int i = 0; i < 64; ++i) {
                const int j = 63 - i;
                for (int c = 0; c < 3; ++c)
                    g.color(pc * 8 + i % 8, pr * 8 + i / 8, c) = f.color(pc * 8 + j % 8, pr * 8 + j / 8, c);
            }
    const FeatureMap a = extract_features(f, 8), b = extract_features(g, 8);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(a.at(r, c)[k] - b.at(r, c)[k]) < 1e-12);
}

TEST_CASE("feature channels stay in the unit interval and decode to the patch mean") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const RgbdFrame f = random_frame(rng, 32, 24);
        const FeatureMap fm = extract_features(f, 8);
        for (double v : fm.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (int r = 0; r < fm.rows; ++r)
            for (int c = 0; c < fm.cols; ++c) {
                double mean[3] = {0, 0, 0};
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        for (int ch = 0; ch < 3; ++ch) mean[ch] += f.color(c * 8 + x, r * 8 + y, ch);
                const auto rgb = decode_color(fm.at(r, c));
                for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(rgb[static_cast<std::size_t>(ch)] - mean[ch] / 64.0) < 1e-9);
            }
    }
}

TEST_CASE("decode_color clamps") {
    const std::vector<double> zero(12, 0.0);
    CHECK(decode_color(zero) == std::array<double, 3>{0, 0, 0});
    const std::vector<double> wild{-1.0, 0.5, 2.0};
    CHECK(decode_color(wild) == std::array<double, 3>{0, 0.5, 1});
    const std::vector<float> f{0.25f, 1.5f, -0.5f, 7.0f};
    CHECK(decode_color(std::span<const float>(f)) == std::array<float, 3>{0.25f, 1.0f, 0.0f});
}

TEST_CASE("bilinear upsampling") {
    FeatureMap two(2, 2, 1);
    two.data = {0, 1, 0, 1};
    const FeatureMap three = upsample_bilinear(two, 3, 3);
    CHECK(three.at(1, 1)[0] == 0.5);
    CHECK(three.at(0, 0)[0] == 0.0);
    CHECK(three.at(2, 2)[0] == 1.0);
    CHECK(three.at(0, 1)[0] == 0.5);

    FeatureMap constant(3, 4, 2);
    std::fill(constant.data.begin(), constant.data.end(), 0.3);
    for (double v : upsample_bilinear(constant, 17, 9).data) CHECK(std::abs(v - 0.3) < 1e-15);

    Rng rng(2);
    FeatureMap random(5, 7, 3);
    for (double& v : random.data) v = rng.uniform();
    CHECK(upsample_bilinear(random, 5, 7) == random);

    // grid-aligned samples reproduce the source exactly: 5 -> 9 doubles the lattice
    const FeatureMap fine = upsample_bilinear(random, 9, 13);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 7; ++c)
            for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(fine.at(2 * r, 2 * c)[k] - random.at(r, c)[k]) < 1e-12);

    CHECK_THROWS_AS(upsample_bilinear(random, 0, 3), std::invalid_argument);
}
