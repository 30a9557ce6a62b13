#include "pmem/io.hpp"

#include "pmem/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

namespace pmem::io {

using nlohmann::json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error("read failed: " + path.string());
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error("write failed: " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot write " + path.string());
    }
}

namespace {

template <typename T>
void put(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    Reader(std::string_view bytes, const char* what) : bytes_(bytes), what_(what) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        char buf[sizeof(T)];
        std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, buf, sizeof(T));
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void expect_magic(std::string_view magic) {
        if (bytes_.substr(0, magic.size()) != magic) fail("bad magic");
        pos_ = magic.size();
    }

    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    [[noreturn]] void fail(const std::string& msg) const { throw Error(std::string(what_) + ": " + msg); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) fail("truncated");
    }

    std::string_view bytes_;
    const char* what_;
    std::size_t pos_ = 0;
};

// Netpbm header: magic then whitespace-separated integers, with # comments.
struct PnmHeader {
    std::vector<std::string> tokens;
    std::size_t data_offset = 0;
};

PnmHeader read_pnm_header(std::string_view bytes, std::size_t n_tokens, const char* what) {
    PnmHeader h;
    std::size_t i = 0;
    while (h.tokens.size() < n_tokens) {
        while (i < bytes.size() && (std::isspace(static_cast<unsigned char>(bytes[i])) || bytes[i] == '#')) {
            if (bytes[i] == '#')
                while (i < bytes.size() && bytes[i] != '\n') ++i;
            else
                ++i;
        }
        if (i >= bytes.size()) throw Error(std::string(what) + ": truncated header");
        const std::size_t start = i;
        while (i < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
        h.tokens.emplace_back(bytes.substr(start, i - start));
    }
    // exactly one whitespace byte separates the header from the raster
    if (i >= bytes.size()) throw Error(std::string(what) + ": truncated header");
    h.data_offset = i + 1;
    return h;
}

int parse_positive(const std::string& token, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(token, &used);
        if (used == token.size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    throw Error(std::string(what) + ": bad header field '" + token + "'");
}

}  // namespace

std::string encode_ppm(const RgbdFrame& frame) {
    require(frame.width > 0 && frame.height > 0, "encode_ppm: empty frame");
    std::string out = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
    out.reserve(out.size() + frame.rgb.size());
    for (float v : frame.rgb) {
        const float c = std::clamp(std::isnan(v) ? 0.0f : v, 0.0f, 1.0f);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f))));
    }
    return out;
}

RgbdFrame decode_ppm(std::string_view bytes) {
    const PnmHeader h = read_pnm_header(bytes, 4, "ppm");
    if (h.tokens[0] != "P6") throw Error("ppm: not a P6 file");
    const int w = parse_positive(h.tokens[1], "ppm");
    const int hgt = parse_positive(h.tokens[2], "ppm");
    if (parse_positive(h.tokens[3], "ppm") != 255) throw Error("ppm: only maxval 255 is supported");
    RgbdFrame frame(w, hgt);
    if (bytes.size() - h.data_offset != frame.rgb.size()) throw Error("ppm: raster size mismatch");
    for (std::size_t i = 0; i < frame.rgb.size(); ++i)
        frame.rgb[i] = static_cast<float>(static_cast<unsigned char>(bytes[h.data_offset + i])) / 255.0f;
    return frame;
}

std::string encode_pfm(const DepthImage& image) {
    require(image.width > 0 && image.height > 0, "encode_pfm: empty image");
    require(image.data.size() == static_cast<std::size_t>(image.width) * image.height, "encode_pfm: size mismatch");
    std::string out = "Pf\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n-1.0\n";
    for (int row = image.height - 1; row >= 0; --row)
        for (int u = 0; u < image.width; ++u) put(out, image.data[static_cast<std::size_t>(row) * image.width + u]);
    return out;
}

DepthImage decode_pfm(std::string_view bytes) {
    const PnmHeader h = read_pnm_header(bytes, 4, "pfm");
    if (h.tokens[0] != "Pf") throw Error("pfm: only grayscale Pf is supported");
    DepthImage image;
    image.width = parse_positive(h.tokens[1], "pfm");
    image.height = parse_positive(h.tokens[2], "pfm");
    double scale = 0.0;
    try {
        scale = std::stod(h.tokens[3]);
    } catch (const std::exception&) {
        throw Error("pfm: bad scale");
    }
    if (!(scale < 0.0)) throw Error("pfm: only little-endian (negative scale) is supported");
    image.data.resize(static_cast<std::size_t>(image.width) * image.height);
    Reader r(bytes.substr(h.data_offset), "pfm");
    if (r.remaining() != image.data.size() * sizeof(float)) r.fail("raster size mismatch");
    for (int row = image.height - 1; row >= 0; --row)
        for (int u = 0; u < image.width; ++u) image.data[static_cast<std::size_t>(row) * image.width + u] = r.get<float>();
    return image;
}

DepthImage depth_of(const RgbdFrame& frame) { return {frame.width, frame.height, frame.depth}; }

void write_frame(const fs::path& ppm, const fs::path& pfm, const RgbdFrame& frame) {
    write_file_atomic(ppm, encode_ppm(frame));
    write_file_atomic(pfm, encode_pfm(depth_of(frame)));
}

RgbdFrame read_frame(const fs::path& ppm, const fs::path& pfm) {
    RgbdFrame frame;
    DepthImage depth;
    try {
        frame = decode_ppm(read_file(ppm));
    } catch (const Error& e) {
        throw Error(ppm.string() + ": " + e.what());
    }
    try {
        depth = decode_pfm(read_file(pfm));
    } catch (const Error& e) {
        throw Error(pfm.string() + ": " + e.what());
    }
    if (depth.width != frame.width || depth.height != frame.height)
        throw Error(pfm.string() + ": depth size differs from " + ppm.string());
    frame.depth = std::move(depth.data);
    return frame;
}

std::uint64_t RawTensor::element_count() const {
    std::uint64_t n = 1;
    for (std::uint64_t d : dims) n *= d;
    return n;
}

std::string encode_tensor(const RawTensor& tensor) {
    require(tensor.values.size() == tensor.element_count(), "encode_tensor: value count does not match dims");
    require(tensor.dtype == DType::F32 || tensor.dtype == DType::F64, "encode_tensor: unknown dtype");
    std::string out = "PTEN";
    put(out, static_cast<std::uint32_t>(tensor.dtype));
    put(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (std::uint64_t d : tensor.dims) put(out, d);
    for (double v : tensor.values) {
        if (tensor.dtype == DType::F32)
            put(out, static_cast<float>(v));
        else
            put(out, v);
    }
    return out;
}

RawTensor decode_tensor(std::string_view bytes) {
    Reader r(bytes, "tensor");
    r.expect_magic("PTEN");
    RawTensor t;
    const auto dtype = r.get<std::uint32_t>();
    if (dtype != 1 && dtype != 2) r.fail("unknown dtype " + std::to_string(dtype));
    t.dtype = static_cast<DType>(dtype);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 16) r.fail("rank too large");
    for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(r.get<std::uint64_t>());
    const std::size_t width = t.dtype == DType::F32 ? 4 : 8;
    const std::uint64_t n = t.element_count();
    if (r.remaining() != n * width) r.fail("payload length does not match dims");
    t.values.resize(n);
    for (double& v : t.values) v = t.dtype == DType::F32 ? static_cast<double>(r.get<float>()) : r.get<double>();
    return t;
}

RawTensor tensor_from_features(const FeatureMap& map) {
    RawTensor t;
    t.dtype = DType::F64;
    t.dims = {static_cast<std::uint64_t>(map.rows), static_cast<std::uint64_t>(map.cols),
              static_cast<std::uint64_t>(map.dim)};
    t.values = map.data;
    return t;
}

FeatureMap features_from_tensor(const RawTensor& tensor) {
    if (tensor.dims.size() != 3) throw Error("feature tensor must have rank 3 (rows, cols, dim)");
    FeatureMap map;
    map.rows = static_cast<int>(tensor.dims[0]);
    map.cols = static_cast<int>(tensor.dims[1]);
    map.dim = static_cast<int>(tensor.dims[2]);
    map.data = tensor.values;
    return map;
}

RawTensor tensor_from_plucker(const PluckerImage& image) {
    RawTensor t;
    t.dtype = DType::F64;
    t.dims = {static_cast<std::uint64_t>(image.height), static_cast<std::uint64_t>(image.width), 6};
    t.values = image.data;
    return t;
}

std::string encode_map(const FeatureGrid& map) {
    const GridSpec& spec = map.spec();
    for (int d : spec.dims) require(d <= 32768, "encode_map: grid dims exceed the i16 index range");
    std::string out = "PMAP";
    put(out, std::uint32_t{1});
    for (int a = 0; a < 3; ++a) put(out, spec.origin[a]);
    for (int a = 0; a < 3; ++a) put(out, spec.cell[a]);
    for (int d : spec.dims) put(out, static_cast<std::int32_t>(d));
    put(out, static_cast<std::uint32_t>(spec.feature_dim));
    put(out, static_cast<std::uint64_t>(map.count()));
    for (const CellIndex& idx : map.sorted_indices()) {
        for (int c : idx) put(out, static_cast<std::int16_t>(c));
        const auto feature = map.find(idx);
        for (float v : *feature) put(out, v);
    }
    return out;
}

FeatureGrid decode_map(std::string_view bytes) {
    Reader r(bytes, "pmap");
    r.expect_magic("PMAP");
    if (const auto version = r.get<std::uint32_t>(); version != 1) r.fail("unsupported version " + std::to_string(version));
    GridSpec spec;
    for (int a = 0; a < 3; ++a) spec.origin[a] = r.get<double>();
    for (int a = 0; a < 3; ++a) spec.cell[a] = r.get<double>();
    for (int& d : spec.dims) d = r.get<std::int32_t>();
    spec.feature_dim = static_cast<int>(r.get<std::uint32_t>());
    try {
        spec.validate();
    } catch (const std::exception& e) {
        r.fail(std::string("invalid grid spec: ") + e.what());
    }
    const auto count = r.get<std::uint64_t>();
    const std::size_t record = 6 + 4 * static_cast<std::size_t>(spec.feature_dim);
    if (r.remaining() / record < count || r.remaining() != count * record) r.fail("record count does not match payload");

    FeatureGrid map(spec);
    std::vector<float> feature(static_cast<std::size_t>(spec.feature_dim));
    for (std::uint64_t i = 0; i < count; ++i) {
        CellIndex idx{};
        for (int& c : idx) c = r.get<std::int16_t>();
        if (!spec.in_bounds(idx)) r.fail("cell index out of bounds");
        if (map.contains(idx)) r.fail("duplicate cell index");
        for (float& v : feature) v = r.get<float>();
        map.merge_max(idx, feature);
    }
    return map;
}

namespace {

json pose_json(const CameraPose& pose) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r)
        rows.push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2), pose.translation[r]});
    return rows;
}

CameraPose pose_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error("pose: expected a 3x4 row-major matrix");
    CameraPose pose;
    for (int r = 0; r < 3; ++r) {
        const json& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || row.size() != 4) throw Error("pose: expected a 3x4 row-major matrix");
        for (int c = 0; c < 3; ++c) pose.rotation(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        pose.translation[r] = row.at(3).get<double>();
    }
    return pose;
}

}  // namespace

std::string pose_to_json(const CameraPose& pose) { return pose_json(pose).dump(); }

CameraPose pose_from_json(std::string_view text) { return pose_from(json::parse(text)); }

std::string poses_to_json(const std::vector<CameraPose>& poses) {
    json arr = json::array();
    for (const CameraPose& p : poses) arr.push_back(pose_json(p));
    return arr.dump(1);
}

std::vector<CameraPose> poses_from_json(std::string_view text) {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw Error("poses: expected an array");
    std::vector<CameraPose> poses;
    for (const json& j : arr) poses.push_back(pose_from(j));
    return poses;
}

std::string actions_to_json(const ActionChunk& actions) {
    json arr = json::array();
    for (const Action& a : actions) arr.push_back({{"action", to_string(a.kind)}, {"magnitude", a.magnitude}});
    return arr.dump(1);
}

ActionChunk actions_from_json(std::string_view text) {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw Error("actions: expected an array");
    ActionChunk chunk;
    for (const json& j : arr) chunk.push_back({action_kind_from_string(j.at("action").get<std::string>()), j.at("magnitude").get<double>()});
    return chunk;
}

SerializedParams encode_params(const BlockParams& params) {
    RawTensor flat;
    flat.dtype = DType::F64;
    json manifest = json::object();
    params.for_each([&](std::string_view name, const Matrix& m) {
        manifest[std::string(name)] = {{"offset", flat.values.size()}, {"rows", m.rows()}, {"cols", m.cols()}};
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) flat.values.push_back(m(r, c));
    });
    manifest["eps"] = params.eps;
    flat.dims = {flat.values.size()};
    return {encode_tensor(flat), manifest.dump(1)};
}

BlockParams decode_params(const BlockDims& dims, std::string_view tensor, std::string_view manifest_text) {
    const RawTensor flat = decode_tensor(tensor);
    const json manifest = json::parse(manifest_text);
    BlockParams params = BlockParams::zeros(dims);
    params.for_each([&](std::string_view name, Matrix& m) {
        const std::string key(name);
        if (!manifest.contains(key)) throw Error("params manifest is missing " + key);
        const json& entry = manifest.at(key);
        if (entry.at("rows").get<Eigen::Index>() != m.rows() || entry.at("cols").get<Eigen::Index>() != m.cols())
            throw Error("params manifest shape mismatch for " + key);
        const auto offset = entry.at("offset").get<std::size_t>();
        if (offset + static_cast<std::size_t>(m.size()) > flat.values.size()) throw Error("params tensor too short for " + key);
        std::size_t k = offset;
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat.values[k++];
    });
    if (manifest.contains("eps")) params.eps = manifest.at("eps").get<double>();
    return params;
}

}  // namespace pmem::io
