#pragma once

// Sparse volumetric feature memory: construction from RGB-D frames,
// max-merge updates, occupied-cell tokens with 3D sinusoidal position
// embeddings, and the camera-embedding latent compression.

#include "pmem/feature.hpp"
#include "pmem/frame.hpp"
#include "pmem/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace pmem {

using CellIndex = std::array<int, 3>;

struct GridSpec {
    Vec3 origin{-4.0, -0.9, -4.0};
    Vec3 cell{0.25, 1.0, 0.25};
    std::array<int, 3> dims{64, 8, 64};
    int feature_dim = kHandcraftedFeatureDim;

    /// 64 x 8 x 64 cells of 0.25 x 1 x 0.25 m holding handcrafted features.
    static GridSpec desk();
    /// 256 x 32 x 256 cells of 0.25 x 1 x 0.25 m holding 384-dim features.
    static GridSpec full_scale();

    void validate() const;
    std::optional<CellIndex> cell_of(const Vec3& point) const;
    Vec3 cell_min(const CellIndex& index) const;
    Vec3 cell_center(const CellIndex& index) const;
    bool in_bounds(const CellIndex& index) const;
    std::uint64_t total_cells() const;

    bool operator==(const GridSpec&) const = default;
};

/// Sparse grid of feature vectors. Absent cells stand for all-zero features.
class FeatureGrid {
public:
    FeatureGrid() : FeatureGrid(GridSpec::desk()) {}
    explicit FeatureGrid(GridSpec spec);

    const GridSpec& spec() const { return spec_; }
    std::size_t count() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }
    bool contains(const CellIndex& index) const;

    /// Stored feature, or nullopt for an empty cell.
    std::optional<std::span<const float>> find(const CellIndex& index) const;
    /// Feature with the all-zero default for empty cells.
    std::vector<float> feature(const CellIndex& index) const;

    /// Component-wise max into the cell, inserting it when empty.
    void merge_max(const CellIndex& index, std::span<const float> feature);
    void merge_max(const FeatureGrid& other);
    void erase(const CellIndex& index);

    /// Occupied indices in lexicographic (x, y, z) order.
    std::vector<CellIndex> sorted_indices() const;
    /// Approximate heap footprint in bytes.
    std::size_t memory_bytes() const;

    bool operator==(const FeatureGrid& other) const;

private:
    std::uint64_t pack(const CellIndex& index) const;

    GridSpec spec_;
    std::unordered_map<std::uint64_t, std::uint32_t> slots_;
    std::vector<CellIndex> keys_;
    std::vector<float> pool_;
};

struct BuildOptions {
    int patch = kDefaultPatch;
    /// Cells with fewer contributions than this within one build are dropped.
    int min_hits = 1;
};

FeatureGrid build_map(std::span<const RgbdFrame> frames, std::span<const CameraPose> poses,
                      const CameraIntrinsics& K, const GridSpec& spec, const BuildOptions& options = {});

/// Same pipeline with externally supplied per-frame patch features.
FeatureGrid build_map_from_features(std::span<const RgbdFrame> frames, std::span<const FeatureMap> features,
                                    std::span<const CameraPose> poses, const CameraIntrinsics& K,
                                    const GridSpec& spec, const BuildOptions& options = {});

/// Component-wise max merge; both grids must share a GridSpec.
FeatureGrid update_map(const FeatureGrid& map, const FeatureGrid& incoming);

struct MemoryTokens {
    Eigen::MatrixXd tokens;  // one row per occupied cell: feature then position embedding
    std::vector<CellIndex> indices;
};

/// Sinusoidal embedding of width `width` (divisible by 6): one block of
/// width/3 per axis holding interleaved sin/cos pairs.
std::vector<double> position_embedding(const CellIndex& index, int width);

MemoryTokens occupied_tokens(const FeatureGrid& map, int pos_dim);

struct CameraLatent {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;  // frames x height x width x channels

    double at(int t, int y, int x, int c) const {
        return data[((static_cast<std::size_t>(t) * height + y) * width + x) * channels + c];
    }
};

/// Spatial mean pooling by `spatial_factor`, then temporal space-to-channel
/// folding of `temporal_group` frames after left-padding with copies of frame 0.
CameraLatent compress_camera(std::span<const PluckerImage> frames, int spatial_factor = 8, int temporal_group = 4);

/// Number of frame-0 copies prepended before temporal folding.
int temporal_padding(int frame_count, int temporal_group);

}  // namespace pmem
