#pragma once

#include "pmem/frame.hpp"
#include "pmem/geometry.hpp"
#include "pmem/predictor.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pmem {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over RGB with peak 1; kPsnrCap on zero error.
double psnr(const RgbdFrame& a, const RgbdFrame& b);

struct SsimOptions {
    int window = 8;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Mean SSIM over non-overlapping windows of the luma channel.
double ssim(const RgbdFrame& a, const RgbdFrame& b, const SsimOptions& options = {});

/// Cosine similarity of flattened patch features.
double feature_cosine(const RgbdFrame& a, const RgbdFrame& b);

/// Mean paired feature cosine x 100. Frame i of the revisit must sit at the
/// pose of frame i of the first visit.
double src(const RgbdVideo& first_visit, const RgbdVideo& revisit, double pose_tol = 1e-6);

/// Translation RMSE without alignment.
double ate(std::span<const CameraPose> pred, std::span<const CameraPose> gt);
double rpe(std::span<const CameraPose> pred, std::span<const CameraPose> gt, std::size_t delta = 1);

/// 100 (0.5 max(0, 1 - |dt| / diag) + 0.5 (1 + cos dtheta) / 2).
double sim_score(const CameraPose& final_pred, const CameraPose& final_gt, double scene_diag);

struct MetricReport {
    std::string name;
    double value = 0.0;
    std::optional<std::vector<double>> per_item;

    std::size_t n_items() const { return per_item ? per_item->size() : 1; }
};

/// Header "metric,value,n_items" then one row per report.
std::string reports_csv(std::span<const MetricReport> reports);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> values);

}  // namespace pmem
