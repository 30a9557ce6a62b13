#pragma once

#include "pmem/frame.hpp"

#include <array>
#include <span>
#include <vector>

namespace pmem {

/// Patch-grid feature tensor, row-major rows x cols x dim.
struct FeatureMap {
    int rows = 0;
    int cols = 0;
    int dim = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int r, int c, int d)
        : rows(r), cols(c), dim(d), data(static_cast<std::size_t>(r) * c * d, 0.0) {}

    std::span<double> at(int r, int c) {
        return {data.data() + (static_cast<std::size_t>(r) * cols + c) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> at(int r, int c) const {
        return {data.data() + (static_cast<std::size_t>(r) * cols + c) * dim, static_cast<std::size_t>(dim)};
    }

    bool operator==(const FeatureMap&) const = default;
};

/// Channels per patch: mean RGB, population std RGB, mean |horizontal
/// difference| RGB, mean |vertical difference| RGB. Differences are taken
/// between neighbours inside the same patch.
inline constexpr int kHandcraftedFeatureDim = 12;
inline constexpr int kDefaultPatch = 8;

FeatureMap extract_features(const RgbdFrame& frame, int patch = kDefaultPatch);

/// Channel-wise bilinear resampling with aligned corners.
FeatureMap upsample_bilinear(const FeatureMap& fm, int out_rows, int out_cols);

/// First three channels clamped to [0, 1].
std::array<double, 3> decode_color(std::span<const double> feature);
std::array<float, 3> decode_color(std::span<const float> feature);

}  // namespace pmem
