#include "pmem/memory_map.hpp"

#include "pmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace pmem {
namespace {
constexpr int kAxisBits = 21;
constexpr std::uint64_t kAxisMask = (std::uint64_t{1} << kAxisBits) - 1;

std::uint64_t pack_index(const CellIndex& index) {
    return (static_cast<std::uint64_t>(index[0]) << (2 * kAxisBits)) |
           (static_cast<std::uint64_t>(index[1]) << kAxisBits) | static_cast<std::uint64_t>(index[2]);
}
}  // namespace

GridSpec GridSpec::desk() { return {}; }

GridSpec GridSpec::full_scale() {
    GridSpec spec;
    spec.origin = Vec3(-32.0, -0.9, -32.0);
    spec.cell = Vec3(0.25, 1.0, 0.25);
    spec.dims = {256, 32, 256};
    spec.feature_dim = 384;
    return spec;
}

void GridSpec::validate() const {
    require(origin.allFinite(), "GridSpec: origin must be finite");
    require(cell.allFinite() && (cell.array() > 0.0).all(), "GridSpec: cell sizes must be positive");
    for (int d : dims) require(d >= 1 && d <= static_cast<int>(kAxisMask), "GridSpec: dims out of range");
    require(feature_dim >= 1, "GridSpec: feature_dim must be positive");
}

std::optional<CellIndex> GridSpec::cell_of(const Vec3& point) const {
    CellIndex index{};
    for (int a = 0; a < 3; ++a) {
        const double f = std::floor((point[a] - origin[a]) / cell[a]);
        if (!(f >= 0.0 && f < dims[static_cast<std::size_t>(a)])) return std::nullopt;
        index[static_cast<std::size_t>(a)] = static_cast<int>(f);
    }
    return index;
}

Vec3 GridSpec::cell_min(const CellIndex& index) const {
    return origin + Vec3(index[0] * cell.x(), index[1] * cell.y(), index[2] * cell.z());
}

Vec3 GridSpec::cell_center(const CellIndex& index) const { return cell_min(index) + 0.5 * cell; }

bool GridSpec::in_bounds(const CellIndex& index) const {
    for (std::size_t a = 0; a < 3; ++a)
        if (index[a] < 0 || index[a] >= dims[a]) return false;
    return true;
}

std::uint64_t GridSpec::total_cells() const {
    return static_cast<std::uint64_t>(dims[0]) * static_cast<std::uint64_t>(dims[1]) *
           static_cast<std::uint64_t>(dims[2]);
}

FeatureGrid::FeatureGrid(GridSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

std::uint64_t FeatureGrid::pack(const CellIndex& index) const {
    if (!spec_.in_bounds(index)) throw std::out_of_range("FeatureGrid: cell index outside grid");
    return pack_index(index);
}

bool FeatureGrid::contains(const CellIndex& index) const {
    return spec_.in_bounds(index) && slots_.count(pack(index)) != 0;
}

std::optional<std::span<const float>> FeatureGrid::find(const CellIndex& index) const {
    if (!spec_.in_bounds(index)) return std::nullopt;
    const auto it = slots_.find(pack(index));
    if (it == slots_.end()) return std::nullopt;
    const auto F = static_cast<std::size_t>(spec_.feature_dim);
    return std::span<const float>(pool_.data() + it->second * F, F);
}

std::vector<float> FeatureGrid::feature(const CellIndex& index) const {
    if (auto f = find(index)) return {f->begin(), f->end()};
    return std::vector<float>(static_cast<std::size_t>(spec_.feature_dim), 0.0f);
}

void FeatureGrid::merge_max(const CellIndex& index, std::span<const float> feature) {
    const auto F = static_cast<std::size_t>(spec_.feature_dim);
    require(feature.size() == F, "FeatureGrid: feature dimension mismatch");
    const std::uint64_t key = pack(index);
    const auto [it, inserted] = slots_.try_emplace(key, static_cast<std::uint32_t>(keys_.size()));
    if (inserted) {
        keys_.push_back(index);
        pool_.insert(pool_.end(), feature.begin(), feature.end());
        return;
    }
    float* dst = pool_.data() + it->second * F;
    // +0 beats -0 so that the merge is commutative bit for bit
    for (std::size_t k = 0; k < F; ++k)
        if (feature[k] > dst[k] || (feature[k] == dst[k] && std::signbit(dst[k]))) dst[k] = feature[k];
}

void FeatureGrid::merge_max(const FeatureGrid& other) {
    require(other.spec_ == spec_, "update_map: grid specs differ");
    const auto F = static_cast<std::size_t>(spec_.feature_dim);
    for (std::size_t slot = 0; slot < other.keys_.size(); ++slot)
        merge_max(other.keys_[slot], std::span<const float>(other.pool_.data() + slot * F, F));
}

void FeatureGrid::erase(const CellIndex& index) {
    if (!spec_.in_bounds(index)) return;
    const auto it = slots_.find(pack(index));
    if (it == slots_.end()) return;
    const auto F = static_cast<std::size_t>(spec_.feature_dim);
    const std::uint32_t slot = it->second;
    const auto last = static_cast<std::uint32_t>(keys_.size() - 1);
    slots_.erase(it);
    if (slot != last) {
        std::copy_n(pool_.begin() + static_cast<std::ptrdiff_t>(last * F), F,
                    pool_.begin() + static_cast<std::ptrdiff_t>(slot * F));
        keys_[slot] = keys_[last];
        slots_[pack(keys_[slot])] = slot;
    }
    keys_.pop_back();
    pool_.resize(pool_.size() - F);
}

std::vector<CellIndex> FeatureGrid::sorted_indices() const {
    std::vector<CellIndex> out = keys_;
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t FeatureGrid::memory_bytes() const {
    // node: key + value + next pointer + cached hash, plus one bucket pointer
    const std::size_t node = sizeof(std::uint64_t) + sizeof(std::uint32_t) + 2 * sizeof(void*) + sizeof(std::size_t);
    return pool_.capacity() * sizeof(float) + keys_.capacity() * sizeof(CellIndex) + slots_.size() * node +
           slots_.bucket_count() * sizeof(void*);
}

bool FeatureGrid::operator==(const FeatureGrid& other) const {
    if (!(spec_ == other.spec_) || count() != other.count()) return false;
    const auto F = static_cast<std::size_t>(spec_.feature_dim);
    for (std::size_t slot = 0; slot < keys_.size(); ++slot) {
        const auto theirs = other.find(keys_[slot]);
        if (!theirs) return false;
        // bitwise comparison so that -0 and +0 are distinguished
        if (std::memcmp(pool_.data() + slot * F, theirs->data(), F * sizeof(float)) != 0) return false;
    }
    return true;
}

FeatureGrid build_map_from_features(std::span<const RgbdFrame> frames, std::span<const FeatureMap> features,
                                    std::span<const CameraPose> poses, const CameraIntrinsics& K,
                                    const GridSpec& spec, const BuildOptions& options) {
    require(!frames.empty(), "build_map: need at least one frame");
    require(frames.size() == poses.size() && frames.size() == features.size(),
            "build_map: frames, features and poses must have equal lengths");
    require(options.min_hits >= 1, "build_map: min_hits must be >= 1");
    K.validate();

    FeatureGrid grid(spec);
    std::unordered_map<std::uint64_t, int> hits;
    const auto F = static_cast<std::size_t>(spec.feature_dim);
    std::vector<float> cell_feature(F);

    for (std::size_t i = 0; i < frames.size(); ++i) {
        const RgbdFrame& frame = frames[i];
        require(frame.width == K.width && frame.height == K.height, "build_map: frame size differs from intrinsics");
        require(features[i].dim == spec.feature_dim, "build_map: feature dimension differs from grid spec");
        const FeatureMap dense = upsample_bilinear(features[i], frame.height, frame.width);
        for (int v = 0; v < frame.height; ++v) {
            for (int u = 0; u < frame.width; ++u) {
                const float depth = frame.depth_at(u, v);
                if (!(depth > 0.0f)) continue;
                const Vec3 p = unproject(u + 0.5, v + 0.5, depth, K, poses[i]);
                const auto index = spec.cell_of(p);
                if (!index) continue;
                const auto src = dense.at(v, u);
                for (std::size_t k = 0; k < F; ++k) cell_feature[k] = static_cast<float>(src[k]);
                grid.merge_max(*index, cell_feature);
                if (options.min_hits > 1) ++hits[pack_index(*index)];
            }
        }
    }

    if (options.min_hits > 1) {
        for (const CellIndex& index : grid.sorted_indices()) {
            if (hits[pack_index(index)] < options.min_hits) grid.erase(index);
        }
    }
    return grid;
}

FeatureGrid build_map(std::span<const RgbdFrame> frames, std::span<const CameraPose> poses,
                      const CameraIntrinsics& K, const GridSpec& spec, const BuildOptions& options) {
    require(!frames.empty(), "build_map: need at least one frame");
    require(frames.size() == poses.size(), "build_map: frames and poses must have equal lengths");
    require(spec.feature_dim == kHandcraftedFeatureDim,
            "build_map: grid feature_dim must match the handcrafted extractor");
    std::vector<FeatureMap> features;
    features.reserve(frames.size());
    for (const RgbdFrame& frame : frames) features.push_back(extract_features(frame, options.patch));
    return build_map_from_features(frames, features, poses, K, spec, options);
}

FeatureGrid update_map(const FeatureGrid& map, const FeatureGrid& incoming) {
    require(map.spec() == incoming.spec(), "update_map: grid specs differ");
    FeatureGrid merged = map;
    merged.merge_max(incoming);
    return merged;
}

std::vector<double> position_embedding(const CellIndex& index, int width) {
    require(width > 0 && width % 6 == 0, "position_embedding: width must be a positive multiple of 6");
    std::vector<double> out(static_cast<std::size_t>(width));
    const int block = width / 3;
    const int pairs = width / 6;
    for (int a = 0; a < 3; ++a) {
        const double x = index[static_cast<std::size_t>(a)];
        for (int k = 0; k < pairs; ++k) {
            const double freq = std::pow(10000.0, -6.0 * k / width);
            out[static_cast<std::size_t>(a * block + 2 * k)] = std::sin(x * freq);
            out[static_cast<std::size_t>(a * block + 2 * k + 1)] = std::cos(x * freq);
        }
    }
    return out;
}

MemoryTokens occupied_tokens(const FeatureGrid& map, int pos_dim) {
    require(pos_dim > 0 && pos_dim % 6 == 0, "occupied_tokens: position width must be a positive multiple of 6");
    MemoryTokens out;
    out.indices = map.sorted_indices();
    const int F = map.spec().feature_dim;
    out.tokens.resize(static_cast<Eigen::Index>(out.indices.size()), F + pos_dim);
    for (std::size_t i = 0; i < out.indices.size(); ++i) {
        const auto feature = *map.find(out.indices[i]);
        const auto row = static_cast<Eigen::Index>(i);
        for (int k = 0; k < F; ++k) out.tokens(row, k) = feature[static_cast<std::size_t>(k)];
        const auto pe = position_embedding(out.indices[i], pos_dim);
        for (int k = 0; k < pos_dim; ++k) out.tokens(row, F + k) = pe[static_cast<std::size_t>(k)];
    }
    return out;
}

int temporal_padding(int frame_count, int temporal_group) {
    require(frame_count >= 1 && temporal_group >= 1, "temporal_padding: counts must be positive");
    // T = 1 + g*m keeps its leading frame in a group of its own
    if (temporal_group > 1 && frame_count % temporal_group == 1) return temporal_group - 1;
    return (temporal_group - frame_count % temporal_group) % temporal_group;
}

CameraLatent compress_camera(std::span<const PluckerImage> frames, int spatial_factor, int temporal_group) {
    require(!frames.empty(), "compress_camera: need at least one frame");
    require(spatial_factor >= 1 && temporal_group >= 1, "compress_camera: factors must be positive");
    const int H = frames[0].height, W = frames[0].width;
    for (const PluckerImage& f : frames)
        require(f.height == H && f.width == W, "compress_camera: frames must share a size");
    require(H % spatial_factor == 0 && W % spatial_factor == 0,
            "compress_camera: spatial factor must divide the frame size");

    constexpr int C = PluckerImage::kChannels;
    const int h = H / spatial_factor, w = W / spatial_factor;
    const double inv_area = 1.0 / (static_cast<double>(spatial_factor) * spatial_factor);

    // pooled[t] is h x w x 6
    std::vector<std::vector<double>> pooled;
    pooled.reserve(frames.size());
    for (const PluckerImage& f : frames) {
        std::vector<double> p(static_cast<std::size_t>(h) * w * C, 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < C; ++c)
                    p[((static_cast<std::size_t>(y / spatial_factor)) * w + x / spatial_factor) * C + c] +=
                        f.at(x, y, c);
        for (double& value : p) value *= inv_area;
        pooled.push_back(std::move(p));
    }

    const int pad = temporal_padding(static_cast<int>(frames.size()), temporal_group);
    const int padded = static_cast<int>(frames.size()) + pad;
    CameraLatent latent;
    latent.frames = padded / temporal_group;
    latent.height = h;
    latent.width = w;
    latent.channels = C * temporal_group;
    latent.data.resize(static_cast<std::size_t>(latent.frames) * h * w * latent.channels);
    for (int t = 0; t < latent.frames; ++t) {
        for (int j = 0; j < temporal_group; ++j) {
            const int source = std::max(0, t * temporal_group + j - pad);
            const auto& p = pooled[static_cast<std::size_t>(source)];
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < C; ++c)
                        latent.data[((static_cast<std::size_t>(t) * h + y) * w + x) * latent.channels + j * C + c] =
                            p[(static_cast<std::size_t>(y) * w + x) * C + c];
        }
    }
    return latent;
}

}  // namespace pmem
