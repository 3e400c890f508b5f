#include "monoview/metrics/quality.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "monoview/data/datapipe.hpp"
#include "monoview/io/image_io.hpp"

namespace monoview::metrics {

namespace fs = std::filesystem;

namespace {

/// Denormalize to exact 8-bit levels held as doubles.
std::vector<double> to_levels(const Tensorf& img) {
    io::Image8 q = data::denormalize(img);
    std::vector<double> out(q.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(q.pixels[i]);
    return out;
}

constexpr double kPeak = 255.0;

} // namespace

double psnr(const Tensorf& pred, const Tensorf& gt, const Tensorf* mask) {
    require(pred.shape() == gt.shape(), "psnr: shape mismatch " + pred.shape().str() +
                                            " vs " + gt.shape().str());
    if (mask)
        require(mask->n() == pred.n() && mask->h() == pred.h() &&
                    mask->w() == pred.w() && mask->c() == 1,
                "psnr: mask must be (N,H,W,1) matching the images");
    const std::vector<double> a = to_levels(pred);
    const std::vector<double> b = to_levels(gt);
    const int C = pred.c();
    double err = 0.0;
    std::int64_t count = 0;
    for (std::int64_t p = 0; p < pred.size() / C; ++p) {
        if (mask && (*mask)[p] == 0.0f) continue;
        for (int c = 0; c < C; ++c) {
            const double d = a[static_cast<std::size_t>(p * C + c)] -
                             b[static_cast<std::size_t>(p * C + c)];
            err += d * d;
        }
        count += C;
    }
    require(count > 0, "psnr: mask covers no pixel");
    const double mse = err / static_cast<double>(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(kPeak * kPeak / mse);
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    const int half = size / 2;
    double sum = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - half, dx = x - half;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(y) * size + x] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;
    return w;
}

} // namespace

double ssim(const Tensorf& pred, const Tensorf& gt) {
    require(pred.shape() == gt.shape(), "ssim: shape mismatch " + pred.shape().str() +
                                            " vs " + gt.shape().str());
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    require(pred.h() >= kWin && pred.w() >= kWin,
            "ssim: image smaller than the 11x11 window");
    static const std::vector<double> window = gaussian_window(kWin, kSigma);

    const std::vector<double> a = to_levels(pred);
    const std::vector<double> b = to_levels(gt);
    const int H = pred.h(), W = pred.w(), C = pred.c(), N = pred.n();
    const double c1 = (0.01 * kPeak) * (0.01 * kPeak);
    const double c2 = (0.03 * kPeak) * (0.03 * kPeak);

    double total = 0.0;
    std::int64_t windows = 0;
    for (int n = 0; n < N; ++n)
        for (int y = 0; y + kWin <= H; ++y)
            for (int x = 0; x + kWin <= W; ++x)
                for (int c = 0; c < C; ++c) {
                    double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
                    for (int wy = 0; wy < kWin; ++wy)
                        for (int wx = 0; wx < kWin; ++wx) {
                            const double wgt =
                                window[static_cast<std::size_t>(wy) * kWin + wx];
                            const std::size_t i =
                                ((static_cast<std::size_t>(n) * H + y + wy) * W + x + wx) * C + c;
                            mu_a += wgt * a[i];
                            mu_b += wgt * b[i];
                            aa += wgt * a[i] * a[i];
                            bb += wgt * b[i] * b[i];
                            ab += wgt * a[i] * b[i];
                        }
                    const double var_a = aa - mu_a * mu_a;
                    const double var_b = bb - mu_b * mu_b;
                    const double cov = ab - mu_a * mu_b;
                    total += (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2) /
                             ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                    ++windows;
                }
    return total / static_cast<double>(windows);
}

namespace {

std::string format_metric(double v) {
    if (std::isinf(v)) return "inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

} // namespace

std::string MetricReport::table() const {
    std::ostringstream os;
    os << std::left << std::setw(24) << "image_id" << std::right << std::setw(10)
       << "psnr" << std::setw(10) << "ssim" << std::setw(14) << "psnr_disocc" << "\n";
    auto row = [&os](const std::string& id, double p, double s,
                     const std::optional<double>& pd, bool empty_mask) {
        os << std::left << std::setw(24) << id << std::right << std::setw(10)
           << format_metric(p) << std::setw(10) << format_metric(s) << std::setw(14)
           << (pd ? format_metric(*pd) : (empty_mask ? "empty-mask" : "-")) << "\n";
    };
    for (const ImageMetrics& m : per_image)
        row(m.image_id, m.psnr, m.ssim, m.psnr_disocc, m.empty_mask);
    row("mean", mean_psnr, mean_ssim, mean_psnr_disocc, false);
    return os.str();
}

std::string MetricReport::records() const {
    std::ostringstream os;
    for (const ImageMetrics& m : per_image) {
        os << "image_id=" << m.image_id << " psnr=" << format_metric(m.psnr)
           << " ssim=" << format_metric(m.ssim);
        if (m.psnr_disocc) os << " psnr_disocc=" << format_metric(*m.psnr_disocc);
        if (m.empty_mask) os << " empty_mask=1";
        os << "\n";
    }
    os << "image_id=mean psnr=" << format_metric(mean_psnr)
       << " ssim=" << format_metric(mean_ssim);
    if (mean_psnr_disocc) os << " psnr_disocc=" << format_metric(*mean_psnr_disocc);
    os << "\n";
    return os.str();
}

MetricReport evaluate_directory(const std::string& pred_dir, const std::string& gt_dir,
                                const std::string& mask_dir) {
    auto list_pngs = [](const std::string& dir) {
        require(fs::is_directory(dir), "not a directory: " + dir);
        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() &&
                fnmatch("*.png", entry.path().filename().string().c_str(), 0) == 0)
                names.push_back(entry.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    };

    const std::vector<std::string> pred_names = list_pngs(pred_dir);
    const std::vector<std::string> gt_names = list_pngs(gt_dir);
    std::set<std::string> pset(pred_names.begin(), pred_names.end());
    std::set<std::string> gset(gt_names.begin(), gt_names.end());
    std::string unpaired;
    for (const std::string& n : pred_names)
        if (!gset.count(n)) unpaired += " pred/" + n;
    for (const std::string& n : gt_names)
        if (!pset.count(n)) unpaired += " gt/" + n;
    require(unpaired.empty(), "unpaired files:" + unpaired);
    require(!pred_names.empty(), "no images to evaluate in " + pred_dir);

    MetricReport report;
    double sum_psnr = 0.0, sum_ssim = 0.0, sum_disocc = 0.0;
    int disocc_count = 0;
    for (const std::string& name : pred_names) {
        ImageMetrics m;
        m.image_id = fs::path(name).stem().string();
        const Tensorf pred = data::normalize(io::read_png((fs::path(pred_dir) / name).string()));
        const Tensorf gt = data::normalize(io::read_png((fs::path(gt_dir) / name).string()));
        m.psnr = psnr(pred, gt);
        m.ssim = ssim(pred, gt);
        if (!mask_dir.empty()) {
            const fs::path mask_path = fs::path(mask_dir) / name;
            require(fs::exists(mask_path), "missing mask " + mask_path.string());
            io::Image8 mask_img = io::read_png(mask_path.string());
            require(mask_img.width == pred.w() && mask_img.height == pred.h(),
                    "mask " + name + " does not match image dimensions");
            Tensorf mask(1, mask_img.height, mask_img.width, 1);
            std::int64_t covered = 0;
            for (std::int64_t p = 0; p < mask.size(); ++p) {
                // read_png expands grayscale to RGB; any nonzero channel marks the pixel
                const std::size_t base = static_cast<std::size_t>(p) * 3;
                const bool on = mask_img.pixels[base] || mask_img.pixels[base + 1] ||
                                mask_img.pixels[base + 2];
                mask[p] = on ? 1.0f : 0.0f;
                covered += on;
            }
            if (covered == 0) {
                m.empty_mask = true; // flagged, masked metric omitted
            } else {
                m.psnr_disocc = psnr(pred, gt, &mask);
                sum_disocc += *m.psnr_disocc;
                ++disocc_count;
            }
        }
        sum_psnr += m.psnr;
        sum_ssim += m.ssim;
        report.per_image.push_back(std::move(m));
    }
    const double n = static_cast<double>(report.per_image.size());
    report.mean_psnr = sum_psnr / n;
    report.mean_ssim = sum_ssim / n;
    if (disocc_count > 0)
        report.mean_psnr_disocc = sum_disocc / static_cast<double>(disocc_count);
    return report;
}

} // namespace monoview::metrics
