#pragma once

#include <cstddef>
#include <vector>

namespace pmem {

/// One RGB-D observation. Pixels are row-major; depth is camera-frame z in
/// meters with 0 meaning "no hit".
struct RgbdFrame {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;    // H x W x 3, values in [0, 1]
    std::vector<float> depth;  // H x W

    RgbdFrame() = default;
    RgbdFrame(int w, int h)
        : width(w), height(h),
          rgb(static_cast<std::size_t>(w) * h * 3, 0.0f),
          depth(static_cast<std::size_t>(w) * h, 0.0f) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
    float& color(int u, int v, int c) { return rgb[index(u, v) * 3 + c]; }
    float color(int u, int v, int c) const { return rgb[index(u, v) * 3 + c]; }
    float& depth_at(int u, int v) { return depth[index(u, v)]; }
    float depth_at(int u, int v) const { return depth[index(u, v)]; }

    bool operator==(const RgbdFrame&) const = default;
};

}  // namespace pmem
