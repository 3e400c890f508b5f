#include "monoview/data/datapipe.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "monoview/error.hpp"

namespace monoview::data {

namespace fs = std::filesystem;

Tensorf normalize(const io::Image8& image) {
    require(image.channels == 3, "normalize: expected an RGB image");
    Tensorf t(1, image.height, image.width, 3);
    const float inv = 1.0f / 127.5f;
    for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<float>(image.pixels[static_cast<std::size_t>(i)]) * inv - 1.0f;
    return t;
}

io::Image8 denormalize(const Tensorf& image) {
    require(image.n() == 1 && image.c() == 3, "denormalize: expected (1,H,W,3)");
    io::Image8 out;
    out.width = image.w();
    out.height = image.h();
    out.channels = 3;
    out.pixels.resize(static_cast<std::size_t>(image.size()));
    for (std::int64_t i = 0; i < image.size(); ++i) {
        float v = (image[i] + 1.0f) * 127.5f;
        v = std::min(255.0f, std::max(0.0f, std::round(v)));
        out.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
    }
    return out;
}

namespace {

std::vector<std::string> list_matching(const std::string& dir, const std::string& glob) {
    require(fs::is_directory(dir), "not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (fnmatch(glob.c_str(), name.c_str(), 0) == 0) names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    return names;
}

} // namespace

StereoDataset StereoDataset::load(const DatasetSpec& spec) {
    require(spec.patch_h % 64 == 0 && spec.patch_w % 64 == 0,
            "patch dimensions must be divisible by 64 (encoder constraint)");
    require(spec.augment_fraction >= 0.0f && spec.augment_fraction <= 1.0f,
            "augment_fraction must be in [0,1]");

    const std::string left_root = (fs::path(spec.root) / spec.left_dir).string();
    const std::string right_root = (fs::path(spec.root) / spec.right_dir).string();
    const std::vector<std::string> left = list_matching(left_root, spec.file_glob);
    const std::vector<std::string> right = list_matching(right_root, spec.file_glob);

    std::set<std::string> lset(left.begin(), left.end());
    std::set<std::string> rset(right.begin(), right.end());
    for (const std::string& n : left)
        require(rset.count(n), "unpaired file: " + spec.left_dir + "/" + n +
                                   " has no counterpart in " + spec.right_dir);
    for (const std::string& n : right)
        require(lset.count(n), "unpaired file: " + spec.right_dir + "/" + n +
                                   " has no counterpart in " + spec.left_dir);
    require(!left.empty(), "no stereo pairs found under " + spec.root);

    StereoDataset ds;
    ds.spec_ = spec;
    for (const std::string& n : left) {
        ds.ids_.push_back(fs::path(n).stem().string());
        ds.left_paths_.push_back((fs::path(left_root) / n).string());
        ds.right_paths_.push_back((fs::path(right_root) / n).string());
    }

    // validation split: explicit split file wins, else a seeded draw
    std::set<int> val_set;
    if (!spec.split_file.empty()) {
        std::ifstream f(spec.split_file);
        require(f.good(), "cannot open split file " + spec.split_file);
        std::string id;
        while (std::getline(f, id)) {
            if (id.empty()) continue;
            auto it = std::find(ds.ids_.begin(), ds.ids_.end(), id);
            require(it != ds.ids_.end(), "split file names unknown source_id '" + id + "'");
            val_set.insert(static_cast<int>(it - ds.ids_.begin()));
        }
    } else if (spec.val_count > 0) {
        require(spec.val_count < ds.total(),
                "val_count " + std::to_string(spec.val_count) + " leaves no training data (" +
                    std::to_string(ds.total()) + " pairs)");
        std::vector<int> order(ds.ids_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng rng(Rng::mix(spec.seed, 0x73706c69)); // split stream
        rng.shuffle(order);
        val_set.insert(order.begin(), order.begin() + spec.val_count);
    }
    for (int i = 0; i < ds.total(); ++i)
        (val_set.count(i) ? ds.val_ : ds.train_).push_back(i);
    return ds;
}

StereoSample StereoDataset::load_pair(int index) const {
    require(index >= 0 && index < total(), "pair index out of range");
    StereoSample s;
    s.source_id = ids_[static_cast<std::size_t>(index)];
    io::Image8 li = io::read_png(left_paths_[static_cast<std::size_t>(index)]);
    io::Image8 ri = io::read_png(right_paths_[static_cast<std::size_t>(index)]);
    require(li.width == ri.width && li.height == ri.height,
            "stereo pair '" + s.source_id + "' has mismatched dimensions");
    s.left = normalize(li);
    s.right = normalize(ri);
    return s;
}

StereoSample extract_patch(const StereoSample& sample, int patch_h, int patch_w, Rng& rng) {
    const int H = sample.left.h(), W = sample.left.w();
    require(H >= patch_h && W >= patch_w,
            "image " + std::to_string(H) + "x" + std::to_string(W) +
                " smaller than patch " + std::to_string(patch_h) + "x" +
                std::to_string(patch_w));
    const int ox = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(W - patch_w + 1)));
    const int oy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(H - patch_h + 1)));

    StereoSample out;
    out.source_id = sample.source_id;
    for (auto [src, dst] : {std::pair{&sample.left, &out.left},
                            std::pair{&sample.right, &out.right}}) {
        *dst = Tensorf(1, patch_h, patch_w, 3);
        for (int y = 0; y < patch_h; ++y)
            std::copy_n(src->data() + src->idx(0, oy + y, ox, 0),
                        static_cast<std::size_t>(patch_w) * 3,
                        dst->data() + dst->idx(0, y, 0, 0));
    }
    return out;
}

Tensorf apply_photometric(const Tensorf& src, float gamma, float brightness) {
    if (gamma == 1.0f && brightness == 1.0f) return src; // exact identity
    Tensorf dst(src.shape());
    for (std::int64_t i = 0; i < src.size(); ++i) {
        // gamma and gain in [0,1] space, then back to [-1,1], clipped
        float u = (src[i] + 1.0f) * 0.5f;
        u = std::pow(std::max(u, 0.0f), gamma) * brightness;
        dst[i] = std::min(1.0f, std::max(-1.0f, u * 2.0f - 1.0f));
    }
    return dst;
}

StereoSample augment(const StereoSample& sample, Rng& rng, float fraction) {
    require(fraction >= 0.0f && fraction <= 1.0f, "augment: fraction must be in [0,1]");
    if (fraction == 0.0f) return sample;
    if (rng.uniform() >= fraction) return sample;
    const float gamma = static_cast<float>(rng.uniform(0.8, 1.2));
    const float bright = static_cast<float>(rng.uniform(0.8, 1.2));

    StereoSample out;
    out.source_id = sample.source_id;
    out.left = apply_photometric(sample.left, gamma, bright);
    out.right = apply_photometric(sample.right, gamma, bright);
    return out;
}

std::vector<std::vector<int>> batches(int count, int batch_size, Rng* shuffle_rng,
                                      bool drop_last) {
    require(batch_size >= 1, "batch_size must be >= 1");
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    if (shuffle_rng) shuffle_rng->shuffle(order);
    std::vector<std::vector<int>> plan;
    for (int start = 0; start < count; start += batch_size) {
        const int end = std::min(count, start + batch_size);
        if (drop_last && end - start < batch_size) break;
        plan.emplace_back(order.begin() + start, order.begin() + end);
    }
    return plan;
}

std::pair<Tensorf, Tensorf> stack_views(const std::vector<StereoSample>& samples) {
    require(!samples.empty(), "stack_views: empty batch");
    const int H = samples[0].left.h(), W = samples[0].left.w();
    const int B = static_cast<int>(samples.size());
    Tensorf left(B, H, W, 3), right(B, H, W, 3);
    const std::int64_t per = static_cast<std::int64_t>(H) * W * 3;
    for (int b = 0; b < B; ++b) {
        require(samples[static_cast<std::size_t>(b)].left.h() == H &&
                    samples[static_cast<std::size_t>(b)].left.w() == W,
                "stack_views: samples have mixed sizes");
        std::copy_n(samples[static_cast<std::size_t>(b)].left.data(), per,
                    left.data() + b * per);
        std::copy_n(samples[static_cast<std::size_t>(b)].right.data(), per,
                    right.data() + b * per);
    }
    return {std::move(left), std::move(right)};
}

// --- BatchProducer ----------------------------------------------------------

struct BatchProducer::Impl {
    const StereoDataset& dataset;
    std::vector<std::vector<int>> plan;
    int patch_h, patch_w;
    float fraction;
    Rng rng;
    bool threaded;

    // sync-mode cursor
    std::size_t cursor = 0;

    // threaded mode: bounded ordered queue filled by one worker
    std::thread worker;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::vector<StereoSample>> queue;
    bool done = false;
    static constexpr std::size_t kQueueCap = 2;

    Impl(const StereoDataset& ds, std::vector<std::vector<int>> p, int ph, int pw,
         float f, std::uint64_t seed, bool thr)
        : dataset(ds), plan(std::move(p)), patch_h(ph), patch_w(pw), fraction(f),
          rng(seed), threaded(thr) {
        if (threaded) worker = std::thread([this] { run(); });
    }

    ~Impl() {
        if (worker.joinable()) {
            {
                std::lock_guard<std::mutex> lock(mu);
                done = true;
            }
            cv.notify_all();
            worker.join();
        }
    }

    std::vector<StereoSample> prepare(const std::vector<int>& indices) {
        std::vector<StereoSample> batch;
        batch.reserve(indices.size());
        for (int idx : indices) {
            StereoSample s = dataset.load_pair(idx);
            if (s.left.h() != patch_h || s.left.w() != patch_w)
                s = extract_patch(s, patch_h, patch_w, rng);
            batch.push_back(augment(s, rng, fraction));
        }
        return batch;
    }

    void run() {
        for (const auto& indices : plan) {
            std::vector<StereoSample> batch = prepare(indices);
            std::unique_lock<std::mutex> lock(mu);
            cv.wait(lock, [this] { return queue.size() < kQueueCap || done; });
            if (done) return;
            queue.push_back(std::move(batch));
            cv.notify_all();
        }
        std::lock_guard<std::mutex> lock(mu);
        done = true;
        cv.notify_all();
    }

    bool next(std::vector<StereoSample>& out) {
        if (!threaded) {
            if (cursor >= plan.size()) return false;
            out = prepare(plan[cursor++]);
            return true;
        }
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [this] { return !queue.empty() || done; });
        if (queue.empty()) return false;
        out = std::move(queue.front());
        queue.pop_front();
        cv.notify_all();
        return true;
    }
};

BatchProducer::BatchProducer(const StereoDataset& dataset,
                             std::vector<std::vector<int>> plan, int patch_h,
                             int patch_w, float augment_fraction,
                             std::uint64_t rng_seed, bool threaded)
    : impl_(std::make_unique<Impl>(dataset, std::move(plan), patch_h, patch_w,
                                   augment_fraction, rng_seed, threaded)) {}

BatchProducer::~BatchProducer() = default;

bool BatchProducer::next(std::vector<StereoSample>& out) { return impl_->next(out); }

} // namespace monoview::data
