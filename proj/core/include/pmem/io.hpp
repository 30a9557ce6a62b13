#pragma once

// Binary and JSON artifact formats. All multi-byte values are little-endian
// regardless of host byte order; every writer goes through a temp file and a
// rename so readers never observe partial files.

#include "pmem/feature.hpp"
#include "pmem/frame.hpp"
#include "pmem/geometry.hpp"
#include "pmem/memory_block.hpp"
#include "pmem/memory_map.hpp"
#include "pmem/scene_sim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pmem::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
void write_file_atomic(const fs::path& path, std::string_view bytes);

// PPM P6, 8-bit: each channel is round(clamp(v, 0, 1) * 255).
std::string encode_ppm(const RgbdFrame& frame);
/// rgb from the file, depth all zero.
RgbdFrame decode_ppm(std::string_view bytes);

struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // row-major, top row first

    bool operator==(const DepthImage&) const = default;
};

// PFM grayscale "Pf", scale -1 (little-endian), rows stored bottom to top.
std::string encode_pfm(const DepthImage& image);
DepthImage decode_pfm(std::string_view bytes);
DepthImage depth_of(const RgbdFrame& frame);

void write_frame(const fs::path& ppm, const fs::path& pfm, const RgbdFrame& frame);
RgbdFrame read_frame(const fs::path& ppm, const fs::path& pfm);

enum class DType : std::uint32_t { F32 = 1, F64 = 2 };

/// "PTEN", u32 dtype, u32 rank, u64 dims[rank], row-major payload.
struct RawTensor {
    DType dtype = DType::F32;
    std::vector<std::uint64_t> dims;
    std::vector<double> values;  // F32 payloads widen exactly

    std::uint64_t element_count() const;
};

std::string encode_tensor(const RawTensor& tensor);
RawTensor decode_tensor(std::string_view bytes);
RawTensor tensor_from_features(const FeatureMap& map);
FeatureMap features_from_tensor(const RawTensor& tensor);
RawTensor tensor_from_plucker(const PluckerImage& image);

/// "PMAP", u32 version, f64 origin[3], f64 cell[3], i32 dims[3], u32 F,
/// u64 count, then count records of i16 index[3] and F f32 in sorted order.
std::string encode_map(const FeatureGrid& map);
FeatureGrid decode_map(std::string_view bytes);

/// {"rotation": [[...] x3], "translation": [...]} as a row-major 3x4.
std::string pose_to_json(const CameraPose& pose);
CameraPose pose_from_json(std::string_view text);
std::string poses_to_json(const std::vector<CameraPose>& poses);
std::vector<CameraPose> poses_from_json(std::string_view text);

std::string actions_to_json(const ActionChunk& actions);
ActionChunk actions_from_json(std::string_view text);

/// Flat f64 tensor holding every parameter plus a JSON manifest mapping each
/// name to {offset, rows, cols}.
struct SerializedParams {
    std::string tensor;
    std::string manifest;
};

SerializedParams encode_params(const BlockParams& params);
BlockParams decode_params(const BlockDims& dims, std::string_view tensor, std::string_view manifest);

}  // namespace pmem::io
