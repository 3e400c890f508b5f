#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "monoview/io/image_io.hpp"
#include "monoview/rng.hpp"
#include "monoview/tensor.hpp"

namespace monoview::data {

/// A rectified stereo pair, normalized to [-1,1], identical dimensions.
struct StereoSample {
    Tensorf left;  // (1,H,W,3)
    Tensorf right; // (1,H,W,3)
    std::string source_id;
};

struct DatasetSpec {
    std::string root;
    std::string left_dir = "left";
    std::string right_dir = "right";
    std::string file_glob = "*.png";
    int patch_h = 256, patch_w = 256; // must be divisible by 64
    float augment_fraction = 0.20f;
    int val_count = 35;     // held out of the training split
    std::uint64_t seed = 0; // drives the split
    std::string split_file; // optional: one validation source_id per line
};

/// v -> v/127.5 - 1, applied per channel. Input buffer is 8-bit RGB.
Tensorf normalize(const io::Image8& image);

/// Inverse of normalize: round to the nearest 8-bit level, clamped.
io::Image8 denormalize(const Tensorf& image);

/// Stereo-pair index: files paired by identical filename under
/// root/left_dir and root/right_dir, ordered by sorted filename.
class StereoDataset {
public:
    static StereoDataset load(const DatasetSpec& spec); // = load_dataset

    const DatasetSpec& spec() const { return spec_; }
    int total() const { return static_cast<int>(ids_.size()); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<int>& train_indices() const { return train_; }
    const std::vector<int>& val_indices() const { return val_; }

    /// Read and normalize pair `index` (into ids()).
    StereoSample load_pair(int index) const;

private:
    DatasetSpec spec_;
    std::vector<std::string> ids_;
    std::vector<std::string> left_paths_, right_paths_;
    std::vector<int> train_, val_;
};

/// Same uniform-random crop applied to both views (rectified stereo keeps
/// correspondences on identical rows, so joint crops preserve disparity).
/// Draw order: x offset, then y offset.
StereoSample extract_patch(const StereoSample& sample, int patch_h, int patch_w, Rng& rng);

/// Gamma then brightness gain in [0,1] space, rescaled to [-1,1], clipped.
/// gamma == brightness == 1 is an exact identity.
Tensorf apply_photometric(const Tensorf& src, float gamma, float brightness);

/// With probability `fraction`: one gamma g and brightness b, both uniform in
/// [0.8, 1.2], applied identically to both views in [0,1] space, result
/// clipped back to [-1,1]. Draw order: apply?, gamma, brightness.
StereoSample augment(const StereoSample& sample, Rng& rng, float fraction);

/// Per-epoch batch plan over `count` items: shuffled when rng is given;
/// training drops the last partial batch, evaluation keeps it.
std::vector<std::vector<int>> batches(int count, int batch_size, Rng* shuffle_rng,
                                      bool drop_last);

/// Stack per-view tensors of equally-sized samples into (B,H,W,3) batch pairs.
std::pair<Tensorf, Tensorf> stack_views(const std::vector<StereoSample>& samples);

/// Prepares batches (load + crop + augment) in plan order. With
/// threaded=true a single worker prepares ahead of the consumer; production
/// order and RNG consumption are identical either way, so outputs are
/// bit-equal between modes.
class BatchProducer {
public:
    BatchProducer(const StereoDataset& dataset, std::vector<std::vector<int>> plan,
                  int patch_h, int patch_w, float augment_fraction,
                  std::uint64_t rng_seed, bool threaded);
    ~BatchProducer();
    BatchProducer(const BatchProducer&) = delete;
    BatchProducer& operator=(const BatchProducer&) = delete;

    /// Next prepared batch; false when the plan is exhausted.
    bool next(std::vector<StereoSample>& out);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace monoview::data
