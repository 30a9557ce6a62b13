#include "pmem/metrics.hpp"

#include "pmem/errors.hpp"
#include "pmem/feature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace pmem {

namespace {

void require_same_size(const RgbdFrame& a, const RgbdFrame& b, const char* what) {
    require(a.width == b.width && a.height == b.height && a.rgb.size() == b.rgb.size(),
            std::string(what) + ": frame sizes differ");
}

std::vector<double> luma(const RgbdFrame& f) {
    std::vector<double> out(f.pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = 0.299 * f.rgb[3 * i] + 0.587 * f.rgb[3 * i + 1] + 0.114 * f.rgb[3 * i + 2];
    return out;
}

}  // namespace

double psnr(const RgbdFrame& a, const RgbdFrame& b) {
    require_same_size(a, b, "psnr");
    require(!a.rgb.empty(), "psnr: empty frames");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.rgb.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const RgbdFrame& a, const RgbdFrame& b, const SsimOptions& options) {
    require_same_size(a, b, "ssim");
    const int w = options.window;
    require(w >= 1 && a.width % w == 0 && a.height % w == 0 && a.width > 0 && a.height > 0,
            "ssim: window must divide the frame size");
    const std::vector<double> la = luma(a);
    const std::vector<double> lb = luma(b);
    const double n = static_cast<double>(w) * w;

    double total = 0.0;
    int windows = 0;
    for (int y0 = 0; y0 < a.height; y0 += w) {
        for (int x0 = 0; x0 < a.width; x0 += w) {
            double ma = 0.0, mb = 0.0;
            for (int y = y0; y < y0 + w; ++y)
                for (int x = x0; x < x0 + w; ++x) {
                    ma += la[a.index(x, y)];
                    mb += lb[a.index(x, y)];
                }
            ma /= n;
            mb /= n;
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (int y = y0; y < y0 + w; ++y)
                for (int x = x0; x < x0 + w; ++x) {
                    const double da = la[a.index(x, y)] - ma;
                    const double db = lb[a.index(x, y)] - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + options.c1) * (2.0 * cov + options.c2)) /
                     ((ma * ma + mb * mb + options.c1) * (va + vb + options.c2));
            ++windows;
        }
    }
    return total / windows;
}

double feature_cosine(const RgbdFrame& a, const RgbdFrame& b) {
    require_same_size(a, b, "feature_cosine");
    const FeatureMap fa = extract_features(a);
    const FeatureMap fb = extract_features(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < fa.data.size(); ++i) {
        dot += fa.data[i] * fb.data[i];
        na += fa.data[i] * fa.data[i];
        nb += fb.data[i] * fb.data[i];
    }
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double src(const RgbdVideo& first_visit, const RgbdVideo& revisit, double pose_tol) {
    require(first_visit.size() == revisit.size(), "src: frame counts differ");
    require(first_visit.size() >= 1, "src: empty videos");
    require(first_visit.poses.size() == first_visit.size() && revisit.poses.size() == revisit.size(),
            "src: every frame needs a pose");
    for (std::size_t i = 0; i < first_visit.size(); ++i) {
        const CameraPose& p = first_visit.poses[i];
        const CameraPose& q = revisit.poses[i];
        const double dr = (p.rotation - q.rotation).cwiseAbs().maxCoeff();
        const double dt = (p.translation - q.translation).cwiseAbs().maxCoeff();
        if (dr > pose_tol || dt > pose_tol) throw Error("revisit poses differ");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < first_visit.size(); ++i) sum += feature_cosine(first_visit.frames[i], revisit.frames[i]);
    return 100.0 * sum / static_cast<double>(first_visit.size());
}

double ate(std::span<const CameraPose> pred, std::span<const CameraPose> gt) {
    require(pred.size() == gt.size(), "ate: trajectory lengths differ");
    require(!pred.empty(), "ate: empty trajectories");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i].translation - gt[i].translation).squaredNorm();
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

double rpe(std::span<const CameraPose> pred, std::span<const CameraPose> gt, std::size_t delta) {
    require(pred.size() == gt.size(), "rpe: trajectory lengths differ");
    require(delta >= 1, "rpe: delta must be >= 1");
    require(pred.size() >= delta + 1, "rpe: trajectory shorter than delta + 1");
    const std::size_t n = pred.size() - delta;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = relative_pose(pred[i], pred[i + delta]).translation;
        const Vec3 b = relative_pose(gt[i], gt[i + delta]).translation;
        sum += (a - b).squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(n));
}

double sim_score(const CameraPose& final_pred, const CameraPose& final_gt, double scene_diag) {
    require(scene_diag > 0.0, "sim_score: scene diagonal must be positive");
    const double dt = (final_pred.translation - final_gt.translation).norm();
    const double dtheta = rotation_angle(final_pred.rotation, final_gt.rotation);
    return 100.0 * (0.5 * std::max(0.0, 1.0 - dt / scene_diag) + 0.5 * (1.0 + std::cos(dtheta)) / 2.0);
}

std::string reports_csv(std::span<const MetricReport> reports) {
    std::string out = "metric,value,n_items\n";
    char line[256];
    for (const MetricReport& r : reports) {
        std::snprintf(line, sizeof line, ",%.10g,%zu\n", r.value, r.n_items());
        out += r.name;
        out += line;
    }
    return out;
}

double mean(std::span<const double> values) {
    require(!values.empty(), "mean: no values");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double sum = 0.0;
    for (double v : values) sum += (v - m) * (v - m);
    return std::sqrt(sum / static_cast<double>(values.size() - 1));
}

}  // namespace pmem
