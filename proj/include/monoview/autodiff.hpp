#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "monoview/tensor.hpp"

namespace monoview {

/// Handle to a node on a Tape.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape. Single use: build a graph forward, call
/// backward() once, read gradients. Values index into the tape that created
/// them. Not thread-safe; one tape per training step.
template <typename T>
class Tape {
public:
    using BackFn = std::function<void(Tape&)>;

    /// Node that participates in no gradient (inputs, targets, constants).
    Value constant(Tensor<T> v) { return push(std::move(v), false, nullptr); }

    /// Differentiable leaf whose gradient stays on the tape (read it back
    /// with grad() after backward). Used for inputs under gradient test.
    Value input(Tensor<T> v) { return push(std::move(v), true, nullptr); }

    /// Disables gradient tracking for subsequently created leaves; inference
    /// passes set this to skip backward-closure bookkeeping entirely.
    void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
    bool grad_enabled() const { return grad_enabled_; }

    /// Differentiable leaf with an external gradient sink; the sink is
    /// accumulated into during backward. Used for network parameters.
    /// A null sink degrades to a constant (frozen parameter).
    Value leaf(const Tensor<T>& v, Tensor<T>* grad_sink) {
        if (grad_sink == nullptr || !grad_enabled_) return constant(v);
        const int oid = next_id();
        return push(v, true, [oid, grad_sink](Tape& t) {
            const Tensor<T>& g = t.nodes_[oid].grad;
            require(grad_sink->shape() == g.shape(), "leaf gradient sink shape mismatch");
            T* dst = grad_sink->data();
            const T* src = g.data();
            for (std::int64_t i = 0; i < g.size(); ++i) dst[i] += src[i];
        });
    }

    const Tensor<T>& value(Value v) const { return nodes_.at(v.id).val; }

    /// Gradient of the last backward() root w.r.t. this node. Empty tensor if
    /// the node did not participate.
    const Tensor<T>& grad(Value v) const { return nodes_.at(v.id).grad; }

    bool needs_grad(Value v) const { return nodes_.at(v.id).needs_grad; }

    /// Backpropagate from a scalar root (shape (1,1,1,1)).
    void backward(Value root) {
        require(root.valid() && root.id < static_cast<int>(nodes_.size()),
                "backward: bad root");
        require(nodes_[root.id].val.size() == 1, "backward: root must be scalar");
        grad_buf(root)[0] = T(1);
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.needs_grad && n.back && !n.grad.empty()) n.back(*this);
        }
    }

    /// Id the next pushed node will receive (lets backward closures refer to
    /// their own output before it exists).
    int next_id() const { return static_cast<int>(nodes_.size()); }

    Value push(Tensor<T> v, bool needs_grad, BackFn back) {
        Node n;
        n.val = std::move(v);
        n.needs_grad = needs_grad;
        if (needs_grad) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Value{static_cast<int>(nodes_.size()) - 1};
    }

    /// Gradient buffer of a node, zero-allocated on first touch.
    Tensor<T>& grad_buf(Value v) {
        Node& n = nodes_.at(v.id);
        if (n.grad.empty()) n.grad = Tensor<T>(n.val.shape());
        return n.grad;
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> val;
        Tensor<T> grad;
        bool needs_grad = false;
        BackFn back;
    };
    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
};

using Tapef = Tape<float>;
using Taped = Tape<double>;

// ---------------------------------------------------------------------------
// Ops. Forward runs eagerly; a backward closure is recorded only when some
// operand needs a gradient. Closures re-read operand values from the tape.
// ---------------------------------------------------------------------------
namespace ops {

// --- elementwise -----------------------------------------------------------

template <typename T, typename F, typename D>
Value unary(Tape<T>& t, Value a, F f, D dydx) {
    const Tensor<T>& x = t.value(a);
    Tensor<T> y(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    if (!t.needs_grad(a)) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, oid, dydx](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        const Tensor<T>& xv = t2.value(a);
        const Tensor<T>& yv = t2.value(Value{oid});
        Tensor<T>& ga = t2.grad_buf(a);
        for (std::int64_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * dydx(xv[i], yv[i]);
    });
}

/// s*a + c, elementwise.
template <typename T>
Value affine(Tape<T>& t, Value a, T s, T c) {
    return unary(t, a, [s, c](T x) { return s * x + c; },
                 [s](T, T) { return s; });
}

template <typename T>
Value scale(Tape<T>& t, Value a, T s) { return affine(t, a, s, T(0)); }

template <typename T>
Value relu(Tape<T>& t, Value a) {
    return unary(t, a, [](T x) { return x > T(0) ? x : T(0); },
                 [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Value relu6(Tape<T>& t, Value a) {
    return unary(t, a,
                 [](T x) { return x < T(0) ? T(0) : (x > T(6) ? T(6) : x); },
                 [](T x, T) { return (x > T(0) && x < T(6)) ? T(1) : T(0); });
}

template <typename T>
Value sigmoid(Tape<T>& t, Value a) {
    return unary(t, a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
                 [](T, T y) { return y * (T(1) - y); });
}

/// |x|; subgradient 0 at the origin.
template <typename T>
Value vabs(Tape<T>& t, Value a) {
    return unary(t, a, [](T x) { return x < T(0) ? -x : x; },
                 [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Value vexp(Tape<T>& t, Value a) {
    return unary(t, a, [](T x) { return std::exp(x); },
                 [](T, T y) { return y; });
}

template <typename T, typename F, typename DA, typename DB>
Value binary(Tape<T>& t, Value a, Value b, F f, DA dfda, DB dfdb) {
    const Tensor<T>& xa = t.value(a);
    const Tensor<T>& xb = t.value(b);
    require(xa.shape() == xb.shape(),
            "binary op shape mismatch: " + xa.shape().str() + " vs " + xb.shape().str());
    Tensor<T> y(xa.shape());
    for (std::int64_t i = 0; i < xa.size(); ++i) y[i] = f(xa[i], xb[i]);
    const bool nga = t.needs_grad(a), ngb = t.needs_grad(b);
    if (!nga && !ngb) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, b, oid, dfda, dfdb, nga, ngb](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        const Tensor<T>& xa2 = t2.value(a);
        const Tensor<T>& xb2 = t2.value(b);
        if (nga) {
            Tensor<T>& ga = t2.grad_buf(a);
            for (std::int64_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * dfda(xa2[i], xb2[i]);
        }
        if (ngb) {
            Tensor<T>& gb = t2.grad_buf(b);
            for (std::int64_t i = 0; i < g.size(); ++i)
                gb[i] += g[i] * dfdb(xa2[i], xb2[i]);
        }
    });
}

template <typename T>
Value add(Tape<T>& t, Value a, Value b) {
    return binary(t, a, b, [](T x, T y) { return x + y; },
                  [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Value sub(Tape<T>& t, Value a, Value b) {
    return binary(t, a, b, [](T x, T y) { return x - y; },
                  [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Value mul(Tape<T>& t, Value a, Value b) {
    return binary(t, a, b, [](T x, T y) { return x * y; },
                  [](T, T y) { return y; }, [](T x, T) { return x; });
}

/// a (N,H,W,C) scaled per pixel by m (N,H,W,1), broadcast across channels.
template <typename T>
Value mul_c1(Tape<T>& t, Value a, Value m) {
    const Tensor<T>& xa = t.value(a);
    const Tensor<T>& xm = t.value(m);
    require(xm.c() == 1 && xm.n() == xa.n() && xm.h() == xa.h() && xm.w() == xa.w(),
            "mul_c1: map must be (N,H,W,1) matching image");
    Tensor<T> y(xa.shape());
    const int C = xa.c();
    for (std::int64_t p = 0; p < xm.size(); ++p)
        for (int c = 0; c < C; ++c) y[p * C + c] = xa[p * C + c] * xm[p];
    const bool nga = t.needs_grad(a), ngm = t.needs_grad(m);
    if (!nga && !ngm) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, m, oid, C, nga, ngm](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        const Tensor<T>& xa2 = t2.value(a);
        const Tensor<T>& xm2 = t2.value(m);
        if (nga) {
            Tensor<T>& ga = t2.grad_buf(a);
            for (std::int64_t p = 0; p < xm2.size(); ++p)
                for (int c = 0; c < C; ++c) ga[p * C + c] += g[p * C + c] * xm2[p];
        }
        if (ngm) {
            Tensor<T>& gm = t2.grad_buf(m);
            for (std::int64_t p = 0; p < xm2.size(); ++p) {
                T acc = T(0);
                for (int c = 0; c < C; ++c) acc += g[p * C + c] * xa2[p * C + c];
                gm[p] += acc;
            }
        }
    });
}

/// Tile the channel axis k times.
template <typename T>
Value repeat_c(Tape<T>& t, Value a, int k) {
    const Tensor<T>& x = t.value(a);
    const int C = x.c();
    Tensor<T> y(x.n(), x.h(), x.w(), C * k);
    const std::int64_t pixels = x.size() / C;
    for (std::int64_t p = 0; p < pixels; ++p)
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < C; ++c) y[(p * k + r) * C + c] = x[p * C + c];
    if (!t.needs_grad(a)) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, oid, k, C, pixels](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        Tensor<T>& ga = t2.grad_buf(a);
        for (std::int64_t p = 0; p < pixels; ++p)
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < C; ++c) ga[p * C + c] += g[(p * k + r) * C + c];
    });
}

// --- reductions ------------------------------------------------------------

/// Mean over all elements -> scalar (1,1,1,1).
template <typename T>
Value mean(Tape<T>& t, Value a) {
    const Tensor<T>& x = t.value(a);
    require(x.size() > 0, "mean of empty tensor");
    T acc = T(0);
    for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
    Tensor<T> y(1, 1, 1, 1);
    y[0] = acc / static_cast<T>(x.size());
    if (!t.needs_grad(a)) return t.constant(std::move(y));
    const int oid = t.next_id();
    const T inv = T(1) / static_cast<T>(x.size());
    return t.push(std::move(y), true, [a, oid, inv](Tape<T>& t2) {
        const T g = t2.grad(Value{oid})[0];
        Tensor<T>& ga = t2.grad_buf(a);
        for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g * inv;
    });
}

// --- spatial gradient (forward differences) --------------------------------

/// dx(x,y) = t(x+1,y) - t(x,y); last column zero.
template <typename T>
Value grad_x(Tape<T>& t, Value a) {
    const Tensor<T>& x = t.value(a);
    Tensor<T> y(x.shape());
    const int N = x.n(), H = x.h(), W = x.w(), C = x.c();
    for (int n = 0; n < N; ++n)
        for (int yy = 0; yy < H; ++yy)
            for (int xx = 0; xx + 1 < W; ++xx)
                for (int c = 0; c < C; ++c)
                    y.at(n, yy, xx, c) = x.at(n, yy, xx + 1, c) - x.at(n, yy, xx, c);
    if (!t.needs_grad(a)) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, oid](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        Tensor<T>& ga = t2.grad_buf(a);
        const int N = g.n(), H = g.h(), W = g.w(), C = g.c();
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx + 1 < W; ++xx)
                    for (int c = 0; c < C; ++c) {
                        const T gv = g.at(n, yy, xx, c);
                        ga.at(n, yy, xx + 1, c) += gv;
                        ga.at(n, yy, xx, c) -= gv;
                    }
    });
}

/// dy(x,y) = t(x,y+1) - t(x,y); last row zero.
template <typename T>
Value grad_y(Tape<T>& t, Value a) {
    const Tensor<T>& x = t.value(a);
    Tensor<T> y(x.shape());
    const int N = x.n(), H = x.h(), W = x.w(), C = x.c();
    for (int n = 0; n < N; ++n)
        for (int yy = 0; yy + 1 < H; ++yy)
            for (int xx = 0; xx < W; ++xx)
                for (int c = 0; c < C; ++c)
                    y.at(n, yy, xx, c) = x.at(n, yy + 1, xx, c) - x.at(n, yy, xx, c);
    if (!t.needs_grad(a)) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, oid](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        Tensor<T>& ga = t2.grad_buf(a);
        const int N = g.n(), H = g.h(), W = g.w(), C = g.c();
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy + 1 < H; ++yy)
                for (int xx = 0; xx < W; ++xx)
                    for (int c = 0; c < C; ++c) {
                        const T gv = g.at(n, yy, xx, c);
                        ga.at(n, yy + 1, xx, c) += gv;
                        ga.at(n, yy, xx, c) -= gv;
                    }
    });
}

// --- structure ops ---------------------------------------------------------

template <typename T>
Value concat_c(Tape<T>& t, Value a, Value b) {
    const Tensor<T>& xa = t.value(a);
    const Tensor<T>& xb = t.value(b);
    require(xa.n() == xb.n() && xa.h() == xb.h() && xa.w() == xb.w(),
            "concat: spatial shape mismatch " + xa.shape().str() + " vs " + xb.shape().str());
    const int Ca = xa.c(), Cb = xb.c();
    Tensor<T> y(xa.n(), xa.h(), xa.w(), Ca + Cb);
    const std::int64_t pixels = xa.size() / Ca;
    for (std::int64_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < Ca; ++c) y[p * (Ca + Cb) + c] = xa[p * Ca + c];
        for (int c = 0; c < Cb; ++c) y[p * (Ca + Cb) + Ca + c] = xb[p * Cb + c];
    }
    const bool nga = t.needs_grad(a), ngb = t.needs_grad(b);
    if (!nga && !ngb) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, b, oid, Ca, Cb, pixels, nga, ngb](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        if (nga) {
            Tensor<T>& ga = t2.grad_buf(a);
            for (std::int64_t p = 0; p < pixels; ++p)
                for (int c = 0; c < Ca; ++c) ga[p * Ca + c] += g[p * (Ca + Cb) + c];
        }
        if (ngb) {
            Tensor<T>& gb = t2.grad_buf(b);
            for (std::int64_t p = 0; p < pixels; ++p)
                for (int c = 0; c < Cb; ++c) gb[p * Cb + c] += g[p * (Ca + Cb) + Ca + c];
        }
    });
}

/// Nearest-neighbor x2 upsampling.
template <typename T>
Value upsample2(Tape<T>& t, Value a) {
    const Tensor<T>& x = t.value(a);
    const int N = x.n(), H = x.h(), W = x.w(), C = x.c();
    Tensor<T> y(N, 2 * H, 2 * W, C);
    for (int n = 0; n < N; ++n)
        for (int yy = 0; yy < 2 * H; ++yy)
            for (int xx = 0; xx < 2 * W; ++xx)
                for (int c = 0; c < C; ++c)
                    y.at(n, yy, xx, c) = x.at(n, yy / 2, xx / 2, c);
    if (!t.needs_grad(a)) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true, [a, oid](Tape<T>& t2) {
        const Tensor<T>& g = t2.grad(Value{oid});
        Tensor<T>& ga = t2.grad_buf(a);
        const int N = ga.n(), H = ga.h(), W = ga.w(), C = ga.c();
        for (int n = 0; n < N; ++n)
            for (int yy = 0; yy < 2 * H; ++yy)
                for (int xx = 0; xx < 2 * W; ++xx)
                    for (int c = 0; c < C; ++c)
                        ga.at(n, yy / 2, xx / 2, c) += g.at(n, yy, xx, c);
    });
}

// --- convolutions ----------------------------------------------------------

struct ConvGeom {
    int ho = 0, wo = 0;
    int pad_t = 0, pad_l = 0;
};

/// TensorFlow-style SAME padding: out = ceil(in/stride), extra padding goes
/// to the bottom/right.
inline ConvGeom conv_geom(int h, int w, int kh, int kw, int stride) {
    ConvGeom g;
    g.ho = (h + stride - 1) / stride;
    g.wo = (w + stride - 1) / stride;
    g.pad_t = std::max((g.ho - 1) * stride + kh - h, 0) / 2;
    g.pad_l = std::max((g.wo - 1) * stride + kw - w, 0) / 2;
    return g;
}

namespace detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// col layout: rows = N*ho*wo (n, oy, ox); cols = kh*kw*cin ((ky*kw+kx)*cin + ci).
template <typename T>
void im2col(const Tensor<T>& x, int kh, int kw, int stride, const ConvGeom& g,
            std::vector<T>& col) {
    const int N = x.n(), H = x.h(), W = x.w(), C = x.c();
    const std::int64_t K = static_cast<std::int64_t>(kh) * kw * C;
    col.assign(static_cast<std::size_t>(N) * g.ho * g.wo * K, T(0));
    T* out = col.data();
    for (int n = 0; n < N; ++n)
        for (int oy = 0; oy < g.ho; ++oy)
            for (int ox = 0; ox < g.wo; ++ox) {
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - g.pad_t + ky;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - g.pad_l + kx;
                        T* dst = out + (static_cast<std::int64_t>(ky) * kw + kx) * C;
                        if (iy >= 0 && iy < H && ix >= 0 && ix < W) {
                            const T* src = x.data() + x.idx(n, iy, ix, 0);
                            for (int c = 0; c < C; ++c) dst[c] = src[c];
                        }
                        // else stays zero (SAME zero padding)
                    }
                }
                out += K;
            }
}

template <typename T>
void col2im_add(const std::vector<T>& col, int kh, int kw, int stride,
                const ConvGeom& g, Tensor<T>& dx) {
    const int N = dx.n(), H = dx.h(), W = dx.w(), C = dx.c();
    const std::int64_t K = static_cast<std::int64_t>(kh) * kw * C;
    const T* src = col.data();
    for (int n = 0; n < N; ++n)
        for (int oy = 0; oy < g.ho; ++oy)
            for (int ox = 0; ox < g.wo; ++ox) {
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - g.pad_t + ky;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - g.pad_l + kx;
                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        const T* s = src + (static_cast<std::int64_t>(ky) * kw + kx) * C;
                        T* dst = dx.data() + dx.idx(n, iy, ix, 0);
                        for (int c = 0; c < C; ++c) dst[c] += s[c];
                    }
                }
                src += K;
            }
}

} // namespace detail

/// 2-D convolution, SAME padding. x (N,H,W,Cin); w (kh,kw,Cin,Cout);
/// b (1,1,1,Cout).
template <typename T>
Value conv2d(Tape<T>& t, Value x, Value w, Value b, int stride) {
    using Mat = detail::MatRM<T>;
    const Tensor<T>& xv = t.value(x);
    const Tensor<T>& wv = t.value(w);
    const Tensor<T>& bv = t.value(b);
    const int kh = wv.n(), kw = wv.h(), cin = wv.w(), cout = wv.c();
    require(xv.c() == cin, "conv2d: input has " + std::to_string(xv.c()) +
                               " channels, kernel expects " + std::to_string(cin));
    require(bv.shape() == Shape{1, 1, 1, cout}, "conv2d: bias shape mismatch");
    const ConvGeom g = conv_geom(xv.h(), xv.w(), kh, kw, stride);
    const std::int64_t rows = static_cast<std::int64_t>(xv.n()) * g.ho * g.wo;
    const std::int64_t K = static_cast<std::int64_t>(kh) * kw * cin;

    Tensor<T> y(xv.n(), g.ho, g.wo, cout);
    {
        std::vector<T> col;
        detail::im2col(xv, kh, kw, stride, g, col);
        Eigen::Map<const Mat> A(col.data(), rows, K);
        Eigen::Map<const Mat> Wm(wv.data(), K, cout);
        Eigen::Map<Mat> O(y.data(), rows, cout);
        O.noalias() = A * Wm;
        O.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bv.data(), cout);
    }
    const bool ngx = t.needs_grad(x), ngw = t.needs_grad(w), ngb = t.needs_grad(b);
    if (!ngx && !ngw && !ngb) return t.constant(std::move(y));
    const int oid = t.next_id();
    // the patch matrix is recomputed in backward rather than retained
    return t.push(std::move(y), true,
                  [x, w, b, oid, stride, kh, kw, cout, g, rows, K, ngx, ngw,
                   ngb](Tape<T>& t2) {
        const Tensor<T>& gy = t2.grad(Value{oid});
        Eigen::Map<const Mat> dY(gy.data(), rows, cout);
        if (ngb) {
            Tensor<T>& gb = t2.grad_buf(b);
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dB(gb.data(), cout);
            dB += dY.colwise().sum();
        }
        if (ngw) {
            Tensor<T>& gw = t2.grad_buf(w);
            std::vector<T> col;
            detail::im2col(t2.value(x), kh, kw, stride, g, col);
            Eigen::Map<const Mat> A(col.data(), rows, K);
            Eigen::Map<Mat> dW(gw.data(), K, cout);
            dW.noalias() += A.transpose() * dY;
        }
        if (ngx) {
            const Tensor<T>& wv2 = t2.value(w);
            Eigen::Map<const Mat> Wm(wv2.data(), K, cout);
            std::vector<T> dcol(static_cast<std::size_t>(rows) * K);
            Eigen::Map<Mat> dC(dcol.data(), rows, K);
            dC.noalias() = dY * Wm.transpose();
            detail::col2im_add(dcol, kh, kw, stride, g, t2.grad_buf(x));
        }
    });
}

/// Depthwise 2-D convolution, SAME padding, channel multiplier 1.
/// x (N,H,W,C); w (kh,kw,C,1); b (1,1,1,C).
template <typename T>
Value depthwise_conv2d(Tape<T>& t, Value x, Value w, Value b, int stride) {
    const Tensor<T>& xv = t.value(x);
    const Tensor<T>& wv = t.value(w);
    const Tensor<T>& bv = t.value(b);
    const int kh = wv.n(), kw = wv.h(), C = wv.w();
    require(wv.c() == 1, "depthwise: channel multiplier must be 1");
    require(xv.c() == C, "depthwise: input has " + std::to_string(xv.c()) +
                             " channels, kernel expects " + std::to_string(C));
    require(bv.shape() == Shape{1, 1, 1, C}, "depthwise: bias shape mismatch");
    const ConvGeom g = conv_geom(xv.h(), xv.w(), kh, kw, stride);
    const int N = xv.n(), H = xv.h(), W = xv.w();

    Tensor<T> y(N, g.ho, g.wo, C);
    for (int n = 0; n < N; ++n)
        for (int oy = 0; oy < g.ho; ++oy)
            for (int ox = 0; ox < g.wo; ++ox) {
                T* out = y.data() + y.idx(n, oy, ox, 0);
                for (int c = 0; c < C; ++c) out[c] = bv[c];
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - g.pad_t + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - g.pad_l + kx;
                        if (ix < 0 || ix >= W) continue;
                        const T* src = xv.data() + xv.idx(n, iy, ix, 0);
                        const T* kk = wv.data() + (static_cast<std::int64_t>(ky) * kw + kx) * C;
                        for (int c = 0; c < C; ++c) out[c] += src[c] * kk[c];
                    }
                }
            }
    const bool ngx = t.needs_grad(x), ngw = t.needs_grad(w), ngb = t.needs_grad(b);
    if (!ngx && !ngw && !ngb) return t.constant(std::move(y));
    const int oid = t.next_id();
    return t.push(std::move(y), true,
                  [x, w, b, oid, stride, kh, kw, C, g, ngx, ngw, ngb](Tape<T>& t2) {
        const Tensor<T>& gy = t2.grad(Value{oid});
        const Tensor<T>& xv2 = t2.value(x);
        const Tensor<T>& wv2 = t2.value(w);
        const int N = xv2.n(), H = xv2.h(), W = xv2.w();
        Tensor<T>* gx = ngx ? &t2.grad_buf(x) : nullptr;
        Tensor<T>* gw = ngw ? &t2.grad_buf(w) : nullptr;
        if (ngb) {
            Tensor<T>& gb = t2.grad_buf(b);
            for (int n = 0; n < N; ++n)
                for (int oy = 0; oy < g.ho; ++oy)
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const T* gp = gy.data() + gy.idx(n, oy, ox, 0);
                        for (int c = 0; c < C; ++c) gb[c] += gp[c];
                    }
        }
        if (!ngx && !ngw) return;
        for (int n = 0; n < N; ++n)
            for (int oy = 0; oy < g.ho; ++oy)
                for (int ox = 0; ox < g.wo; ++ox) {
                    const T* gp = gy.data() + gy.idx(n, oy, ox, 0);
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride - g.pad_t + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride - g.pad_l + kx;
                            if (ix < 0 || ix >= W) continue;
                            const std::int64_t koff =
                                (static_cast<std::int64_t>(ky) * kw + kx) * C;
                            const T* src = xv2.data() + xv2.idx(n, iy, ix, 0);
                            const T* kk = wv2.data() + koff;
                            if (gx) {
                                T* dx = gx->data() + gx->idx(n, iy, ix, 0);
                                for (int c = 0; c < C; ++c) dx[c] += gp[c] * kk[c];
                            }
                            if (gw) {
                                T* dw = gw->data() + koff;
                                for (int c = 0; c < C; ++c) dw[c] += gp[c] * src[c];
                            }
                        }
                    }
                }
    });
}

} // namespace ops

} // namespace monoview
