#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "monoview/data/datapipe.hpp"
#include "monoview/io/image_io.hpp"
#include "monoview/rng.hpp"
#include "monoview/tensor.hpp"

namespace testutil {

template <typename T>
monoview::Tensor<T> random_tensor(const monoview::Shape& shape, std::uint64_t seed,
                                  T lo, T hi) {
    monoview::Rng rng(seed);
    monoview::Tensor<T> t(shape);
    for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
}

template <typename T>
double max_abs_diff(const monoview::Tensor<T>& a, const monoview::Tensor<T>& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) -
                                         static_cast<double>(b[i])));
    return worst;
}

/// Scoped temporary directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        namespace fs = std::filesystem;
        path_ = (fs::temp_directory_path() /
                 ("monoview_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++)))
                    .string();
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string sub(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }

private:
    std::string path_;
};

/// Smooth random texture: sum of sinusoids per channel, 8-bit. Smoothness
/// keeps bilinear-warp gradients informative over a few pixels.
inline monoview::io::Image8 smooth_texture(int width, int height, std::uint64_t seed) {
    monoview::Rng rng(seed);
    monoview::io::Image8 img;
    img.width = width;
    img.height = height;
    img.channels = 3;
    img.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    for (int c = 0; c < 3; ++c) {
        const double ax = rng.uniform(0.05, 0.25), bx = rng.uniform(0.0, 6.28);
        const double ay = rng.uniform(0.05, 0.25), by = rng.uniform(0.0, 6.28);
        const double ad = rng.uniform(0.03, 0.15), bd = rng.uniform(0.0, 6.28);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double v = 0.5 + 0.22 * std::sin(ax * x + bx) +
                                 0.18 * std::sin(ay * y + by) +
                                 0.10 * std::sin(ad * (x + y) + bd);
                const int q = std::min(255, std::max(0, static_cast<int>(v * 255.0 + 0.5)));
                img.pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
                    static_cast<std::uint8_t>(q);
            }
    }
    return img;
}

/// Write `count` synthetic stereo pairs under root/{left,right}/NNN.png.
/// The right view is the left view shifted by a constant integer disparity:
/// R(x) = L(x + disparity).
inline void write_stereo_dataset(const std::string& root, int count, int height,
                                 int width, int disparity, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(root) / "left");
    fs::create_directories(fs::path(root) / "right");
    for (int i = 0; i < count; ++i) {
        monoview::io::Image8 wide = smooth_texture(width + disparity, height, seed + i);
        monoview::io::Image8 left, right;
        left.width = right.width = width;
        left.height = right.height = height;
        left.channels = right.channels = 3;
        left.pixels.resize(static_cast<std::size_t>(width) * height * 3);
        right.pixels.resize(left.pixels.size());
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < 3; ++c) {
                    left.pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
                        wide.pixels[(static_cast<std::size_t>(y) * wide.width + x) * 3 + c];
                    right.pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
                        wide.pixels[(static_cast<std::size_t>(y) * wide.width + x +
                                     disparity) * 3 + c];
                }
        char name[32];
        std::snprintf(name, sizeof(name), "%03d.png", i);
        monoview::io::write_png((fs::path(root) / "left" / name).string(), left);
        monoview::io::write_png((fs::path(root) / "right" / name).string(), right);
    }
}

} // namespace testutil
