#include "pmem/feature.hpp"

#include "pmem/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pmem {

FeatureMap extract_features(const RgbdFrame& frame, int patch) {
    require(patch >= 1, "extract_features: patch must be positive");
    require(frame.width > 0 && frame.height > 0, "extract_features: empty frame");
    require(frame.width % patch == 0 && frame.height % patch == 0,
            "extract_features: patch must divide the image size");

    FeatureMap fm(frame.height / patch, frame.width / patch, kHandcraftedFeatureDim);
    const double n = static_cast<double>(patch) * patch;
    const double pairs = static_cast<double>(patch - 1) * patch;

    for (int pr = 0; pr < fm.rows; ++pr) {
        for (int pc = 0; pc < fm.cols; ++pc) {
            const int u0 = pc * patch, v0 = pr * patch;
            auto out = fm.at(pr, pc);
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                for (int v = v0; v < v0 + patch; ++v)
                    for (int u = u0; u < u0 + patch; ++u) sum += frame.color(u, v, c);
                const double mean = sum / n;

                double sq = 0.0, gx = 0.0, gy = 0.0;
                for (int v = v0; v < v0 + patch; ++v) {
                    for (int u = u0; u < u0 + patch; ++u) {
                        const double x = frame.color(u, v, c);
                        sq += (x - mean) * (x - mean);
                        if (u + 1 < u0 + patch) gx += std::abs(frame.color(u + 1, v, c) - x);
                        if (v + 1 < v0 + patch) gy += std::abs(frame.color(u, v + 1, c) - x);
                    }
                }
                out[c] = mean;
                out[3 + c] = std::sqrt(sq / n);
                out[6 + c] = pairs > 0.0 ? gx / pairs : 0.0;
                out[9 + c] = pairs > 0.0 ? gy / pairs : 0.0;
            }
        }
    }
    return fm;
}

FeatureMap upsample_bilinear(const FeatureMap& fm, int out_rows, int out_cols) {
    require(out_rows >= 1 && out_cols >= 1, "upsample_bilinear: output size must be positive");
    require(fm.rows >= 1 && fm.cols >= 1, "upsample_bilinear: empty input");
    if (out_rows == fm.rows && out_cols == fm.cols) return fm;

    FeatureMap out(out_rows, out_cols, fm.dim);
    const double sy = out_rows > 1 ? static_cast<double>(fm.rows - 1) / (out_rows - 1) : 0.0;
    const double sx = out_cols > 1 ? static_cast<double>(fm.cols - 1) / (out_cols - 1) : 0.0;
    for (int r = 0; r < out_rows; ++r) {
        const double y = r * sy;
        const int y0 = std::min(static_cast<int>(std::floor(y)), fm.rows - 1);
        const int y1 = std::min(y0 + 1, fm.rows - 1);
        const double wy = y - y0;
        for (int c = 0; c < out_cols; ++c) {
            const double x = c * sx;
            const int x0 = std::min(static_cast<int>(std::floor(x)), fm.cols - 1);
            const int x1 = std::min(x0 + 1, fm.cols - 1);
            const double wx = x - x0;
            const auto a = fm.at(y0, x0), b = fm.at(y0, x1), p = fm.at(y1, x0), q = fm.at(y1, x1);
            auto dst = out.at(r, c);
            for (int k = 0; k < fm.dim; ++k) {
                const double top = a[k] + wx * (b[k] - a[k]);
                const double bottom = p[k] + wx * (q[k] - p[k]);
                dst[k] = top + wy * (bottom - top);
            }
        }
    }
    return out;
}

std::array<double, 3> decode_color(std::span<const double> feature) {
    require(feature.size() >= 3, "decode_color: feature needs at least 3 channels");
    return {std::clamp(feature[0], 0.0, 1.0), std::clamp(feature[1], 0.0, 1.0), std::clamp(feature[2], 0.0, 1.0)};
}

std::array<float, 3> decode_color(std::span<const float> feature) {
    require(feature.size() >= 3, "decode_color: feature needs at least 3 channels");
    return {std::clamp(feature[0], 0.0f, 1.0f), std::clamp(feature[1], 0.0f, 1.0f),
            std::clamp(feature[2], 0.0f, 1.0f)};
}

}  // namespace pmem
