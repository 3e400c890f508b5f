#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "monoview/error.hpp"

namespace monoview {

/// Rank-4 shape. Images are (n, h, w, c); convolution kernels reuse the same
/// container as (kernel_h, kernel_w, in_channels, out_channels).
struct Shape {
    int n = 0, h = 0, w = 0, c = 0;

    std::int64_t size() const {
        return static_cast<std::int64_t>(n) * h * w * c;
    }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(h) + "," +
               std::to_string(w) + "," + std::to_string(c) + ")";
    }
};

/// Dense rank-4 tensor, NHWC, row-major (c fastest).
template <typename T>
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int h, int w, int c)
        : shape_{n, h, w, c},
          data_(static_cast<std::size_t>(Shape{n, h, w, c}.size()), T(0)) {}
    explicit Tensor(const Shape& s) : Tensor(s.n, s.h, s.w, s.c) {}

    static Tensor full(const Shape& s, T v) {
        Tensor t(s);
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const Shape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    int c() const { return shape_.c; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::size_t idx(int n, int y, int x, int c) const {
        return ((static_cast<std::size_t>(n) * shape_.h + y) * shape_.w + x) *
                   shape_.c + c;
    }
    T& at(int n, int y, int x, int c) { return data_[idx(n, y, x, c)]; }
    const T& at(int n, int y, int x, int c) const { return data_[idx(n, y, x, c)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T(0)); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

} // namespace monoview
