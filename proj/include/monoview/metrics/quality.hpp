#pragma once

#include <optional>
#include <string>
#include <vector>

#include "monoview/tensor.hpp"

namespace monoview::metrics {

/// PSNR in dB between two [-1,1] images, computed on 8-bit-equivalent values
/// (denormalized, rounded, peak 255). A mask (1,H,W,1) restricts the error to
/// nonzero positions, all channels. Identical inputs give +infinity.
double psnr(const Tensorf& pred, const Tensorf& gt, const Tensorf* mask = nullptr);

/// Single-scale SSIM on 8-bit-equivalent values: 11x11 Gaussian window,
/// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 255. Windows are evaluated
/// where they fit entirely (valid mode); channels averaged.
double ssim(const Tensorf& pred, const Tensorf& gt);

struct ImageMetrics {
    std::string image_id;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> psnr_disocc; // absent without a usable mask
    bool empty_mask = false;           // mask present but covered no pixel
};

struct MetricReport {
    std::vector<ImageMetrics> per_image;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::optional<double> mean_psnr_disocc;

    /// Fixed-width human-readable table.
    std::string table() const;
    /// Line-delimited records: image_id=... psnr=... ssim=... [psnr_disocc=...]
    std::string records() const;
};

/// Evaluate pred_dir against gt_dir (8-bit PNGs paired by filename). An
/// optional mask_dir supplies disocclusion masks (8-bit PNG, nonzero =
/// disoccluded = evaluated) for the masked PSNR column.
MetricReport evaluate_directory(const std::string& pred_dir, const std::string& gt_dir,
                                const std::string& mask_dir = "");

} // namespace monoview::metrics
