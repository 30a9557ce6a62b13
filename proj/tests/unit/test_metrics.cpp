#include <doctest.h>

#include "pmem/errors.hpp"
#include "pmem/metrics.hpp"
#include "pmem/random.hpp"

#include <cmath>
#include <numbers>

using namespace pmem;
using std::numbers::pi;

namespace {

RgbdFrame constant(float r, float g, float b, int size = 16) {
    RgbdFrame f(size, size);
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        f.rgb[3 * i] = r;
        f.rgb[3 * i + 1] = g;
        f.rgb[3 * i + 2] = b;
    }
    return f;
}

RgbdFrame noise(std::uint64_t seed, int size = 16) {
    Rng rng(seed);
    RgbdFrame f(size, size);
    for (float& c : f.rgb) c = static_cast<float>(rng.uniform());
    return f;
}

std::vector<CameraPose> random_path(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<CameraPose> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(CameraPose::upright(Vec3(rng.uniform(-3, 3), rng.uniform(0, 1), rng.uniform(-3, 3)), rng.uniform(0, 2 * pi)));
    return out;
}

RgbdVideo video(std::vector<RgbdFrame> frames, std::vector<CameraPose> poses) {
    RgbdVideo v;
    v.frames = std::move(frames);
    v.poses = std::move(poses);
    return v;
}

}  // namespace

TEST_CASE("psnr") {
    const RgbdFrame a = noise(1);
    CHECK(psnr(a, a) == kPsnrCap);
    CHECK(psnr(constant(0, 0, 0), constant(0.5f, 0.5f, 0.5f)) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
    const RgbdFrame b = noise(2);
    CHECK(psnr(a, b) == psnr(b, a));

    // constant offset: closed form 10 log10(1 / d^2); values on a 1/256 grid
    // so that adding d is exact in float
    RgbdFrame base = a;
    for (float& c : base.rgb) c = std::floor(c * 256.0f) / 256.0f;
    RgbdFrame shifted = base;
    const float d = 0.0625f;
    for (float& c : shifted.rgb) c += d;
    CHECK(std::abs(psnr(base, shifted) - 10.0 * std::log10(1.0 / (static_cast<double>(d) * d))) < 1e-9);
    CHECK_THROWS_AS(psnr(a, RgbdFrame(8, 8)), std::invalid_argument);
}

TEST_CASE("ssim") {
    const RgbdFrame a = noise(3);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    const RgbdFrame b = noise(4);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));

    const SsimOptions opts;
    const double ma = 0.2, mb = 0.7;  // grey, so luma equals the value
    const double expect = (2 * ma * mb + opts.c1) / (ma * ma + mb * mb + opts.c1);
    const double got = ssim(constant(0.2f, 0.2f, 0.2f), constant(0.7f, 0.7f, 0.7f));
    // floats 0.2f and 0.7f are not exactly 0.2 and 0.7
    const double fa = 0.2f, fb = 0.7f;
    const double luma_a = (0.299 + 0.587 + 0.114) * fa, luma_b = (0.299 + 0.587 + 0.114) * fb;
    CHECK(std::abs(got - (2 * luma_a * luma_b + opts.c1) / (luma_a * luma_a + luma_b * luma_b + opts.c1)) < 1e-9);
    CHECK(std::abs(got - expect) < 1e-6);
    CHECK_THROWS_AS(ssim(RgbdFrame(12, 12), RgbdFrame(12, 12)), std::invalid_argument);
}

TEST_CASE("feature cosine and src") {
    const std::vector<CameraPose> poses = random_path(5, 3);
    const RgbdVideo first = video({noise(1), noise(2), noise(3)}, poses);
    CHECK(src(first, first) == doctest::Approx(100.0).epsilon(1e-12));

    // features of pure red and pure green constants share no non-zero channel
    const RgbdVideo red = video({constant(1, 0, 0)}, {poses[0]});
    const RgbdVideo green = video({constant(0, 1, 0)}, {poses[0]});
    CHECK(feature_cosine(red.frames[0], green.frames[0]) == 0.0);
    CHECK(src(red, green) == 0.0);

    CHECK(feature_cosine(constant(0, 0, 0), constant(0, 0, 0)) == 1.0);
    CHECK(feature_cosine(constant(0, 0, 0), constant(1, 0, 0)) == 0.0);

    RgbdVideo moved = first;
    moved.poses[1].translation.x() += 1e-3;
    CHECK_THROWS_AS(src(first, moved), Error);
    moved.poses[1].translation.x() -= 1e-3 - 1e-7;  // within tolerance
    CHECK_NOTHROW(src(first, moved));
    CHECK_THROWS_AS(src(first, red), std::invalid_argument);
}

TEST_CASE("ate") {
    const auto gt = random_path(6, 10);
    CHECK(ate(gt, gt) == 0.0);
    auto shifted = gt;
    const Vec3 d(0.3, -0.4, 1.2);
    for (auto& p : shifted) p.translation += d;
    CHECK(ate(shifted, gt) == doctest::Approx(d.norm()).epsilon(1e-12));

    const auto pred = random_path(7, 10);
    double sum = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        const double dx = pred[i].translation.x() - gt[i].translation.x();
        const double dy = pred[i].translation.y() - gt[i].translation.y();
        const double dz = pred[i].translation.z() - gt[i].translation.z();
        sum += dx * dx + dy * dy + dz * dz;
    }
    CHECK(ate(pred, gt) == doctest::Approx(std::sqrt(sum / 10)).epsilon(1e-12));
    CHECK_THROWS_AS(ate(pred, std::span(gt).first(3)), std::invalid_argument);
}

TEST_CASE("rpe") {
    const auto gt = random_path(8, 12);
    CHECK(rpe(gt, gt) == 0.0);
    auto shifted = gt;
    for (auto& p : shifted) p.translation += Vec3(5, -2, 7);
    CHECK(rpe(shifted, gt) < 1e-9);
    CHECK(rpe(shifted, gt, 3) < 1e-9);

    const auto at = [](double x, double z) { return CameraPose::upright(Vec3(x, 0, z), 0.0); };
    const std::vector<CameraPose> g{at(0, 0), at(1, 0), at(1, 1)};
    const std::vector<CameraPose> p{at(0, 0), at(1, 0), at(1, 2)};
    CHECK(rpe(p, g) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(rpe(p, g, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(rpe(p, g, 3), std::invalid_argument);
}

TEST_CASE("sim score boundary cases") {
    const CameraPose a = CameraPose::upright(Vec3(1, 0, 1), 0.3);
    CHECK(sim_score(a, a, 10.0) == doctest::Approx(100.0).epsilon(1e-12));
    const CameraPose turned = CameraPose::upright(Vec3(1, 0, 1), 0.3 + pi);
    CHECK(sim_score(turned, a, 10.0) == doctest::Approx(50.0).epsilon(1e-12));
    const CameraPose far = CameraPose::upright(Vec3(1 + 10, 0, 1), 0.3 + pi);
    CHECK(std::abs(sim_score(far, a, 10.0)) < 1e-12);
    CHECK_THROWS_AS(sim_score(a, a, 0.0), std::invalid_argument);
}

TEST_CASE("report csv and summary statistics") {
    const std::vector<MetricReport> reports{{"psnr", 22.5, std::nullopt}, {"src", 81.7, std::vector<double>{80, 83.4}}};
    CHECK(reports_csv(reports) == "metric,value,n_items\npsnr,22.5,1\nsrc,81.7,2\n");
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(mean(v) == 2.5);
    CHECK(stddev(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(stddev(std::span(v).first(1)) == 0.0);
    CHECK_THROWS_AS(mean(std::span<const double>()), std::invalid_argument);
}
