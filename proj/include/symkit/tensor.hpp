#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "symkit/common.hpp"

namespace symkit {

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Dense row-major tensor of doubles with an explicit shape. No views, no
// broadcasting; every operation below states its shape contract and throws
// std::invalid_argument when it is violated.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_)) {
            throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_string(shape_));
        }
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t m = rows.size();
        const std::size_t n = m == 0 ? 0 : rows.begin()->size();
        Tensor t({m, n});
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != n) throw std::invalid_argument("tensor: ragged row list");
            std::size_t j = 0;
            for (double v : row) t(i, j++) = v;
            ++i;
        }
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i) {
        assert(rank() == 1 && i < shape_[0]);
        return data_[i];
    }
    double operator()(std::size_t i) const {
        assert(rank() == 1 && i < shape_[0]);
        return data_[i];
    }
    double& operator()(std::size_t i, std::size_t j) {
        assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
        return data_[i * shape_[1] + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
        return data_[i * shape_[1] + j];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        assert(rank() == 4);
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        assert(rank() == 4);
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

namespace detail {
inline void require_rank(const Tensor& t, std::size_t r, const char* op) {
    if (t.rank() != r) {
        throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(r) +
                                    " tensor, got " + shape_string(t.shape()));
    }
}
}  // namespace detail

// c[i,j] = sum_t a[i,t] * b[t,j]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_rank(a, 2, "matmul");
    detail::require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: inner dimensions mismatch: " + shape_string(a.shape()) +
                                    " vs " + shape_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double av = a(i, t);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) c(i, j) += av * b(t, j);
        }
    }
    return c;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("add: shape mismatch: " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    }
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

// Row-wise softmax with max-subtraction; rows sum to 1 for finite input.
inline Tensor softmax_rows(const Tensor& a) {
    detail::require_rank(a, 2, "softmax_rows");
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = a(i, 0);
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = std::exp(a(i, j) - mx);
            sum += out(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) out(i, j) /= sum;
    }
    return out;
}

// Per-row normalization with population (1/n) variance, then affine
// gamma/beta over the feature axis.
inline Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
    detail::require_rank(a, 2, "layer_norm");
    detail::require_rank(gamma, 1, "layer_norm");
    detail::require_rank(beta, 1, "layer_norm");
    const std::size_t m = a.dim(0), n = a.dim(1);
    if (gamma.dim(0) != n || beta.dim(0) != n) {
        throw std::invalid_argument("layer_norm: gamma/beta length must match feature dim " +
                                    std::to_string(n));
    }
    if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += a(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = a(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = (a(i, j) - mean) * inv * gamma(j) + beta(j);
        }
    }
    return out;
}

// Kept strictly inside (0, 1) even where exp saturates; downstream gating
// masks rely on the open interval.
inline double sigmoid_scalar(double x) {
    const double v = 1.0 / (1.0 + std::exp(-x));
    if (v <= 0.0) return std::numeric_limits<double>::min();
    if (v >= 1.0) return 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return v;
}

// Elementwise logistic; output strictly inside (0, 1) for finite input.
inline Tensor sigmoid(const Tensor& a) {
    Tensor out = a;
    for (double& v : out.data()) v = sigmoid_scalar(v);
    return out;
}

// Columnwise mean of an [N x C] tensor.
inline Tensor mean_rows(const Tensor& a) {
    detail::require_rank(a, 2, "mean_rows");
    const std::size_t n = a.dim(0), c = a.dim(1);
    if (n == 0) throw std::invalid_argument("mean_rows: empty input (N = 0)");
    Tensor out({c});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) out(j) += a(i, j);
    for (std::size_t j = 0; j < c; ++j) out(j) /= static_cast<double>(n);
    return out;
}

// Pointwise channel mix: out[k,h,w] = sum_c w[k,c] * f[c,h,w] + b[k]
inline Tensor conv1x1(const Tensor& f, const Tensor& w, const Tensor& b) {
    detail::require_rank(f, 3, "conv1x1");
    detail::require_rank(w, 2, "conv1x1");
    detail::require_rank(b, 1, "conv1x1");
    const std::size_t c = f.dim(0), h = f.dim(1), ww = f.dim(2);
    const std::size_t k = w.dim(0);
    if (w.dim(1) != c || b.dim(0) != k) {
        throw std::invalid_argument("conv1x1: weight " + shape_string(w.shape()) + " and bias " +
                                    shape_string(b.shape()) + " do not fit input " +
                                    shape_string(f.shape()));
    }
    Tensor out({k, h, ww});
    for (std::size_t ko = 0; ko < k; ++ko) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < ww; ++x) {
                double acc = b(ko);
                for (std::size_t ci = 0; ci < c; ++ci) acc += w(ko, ci) * f(ci, y, x);
                out(ko, y, x) = acc;
            }
        }
    }
    return out;
}

// Per-channel 2-D correlation with zero padding (k-1)/2 plus a per-channel
// scalar bias at every site. Kernel size must be odd.
inline Tensor depthwise_conv(const Tensor& f, const Tensor& kernels, const Tensor& bias) {
    detail::require_rank(f, 3, "depthwise_conv");
    detail::require_rank(kernels, 3, "depthwise_conv");
    detail::require_rank(bias, 1, "depthwise_conv");
    const std::size_t c = f.dim(0), h = f.dim(1), w = f.dim(2);
    const std::size_t kc = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2);
    if (kc != c || bias.dim(0) != c) {
        throw std::invalid_argument("depthwise_conv: kernels " + shape_string(kernels.shape()) +
                                    " / bias " + shape_string(bias.shape()) +
                                    " do not fit input " + shape_string(f.shape()));
    }
    if (kh != kw || kh % 2 == 0) {
        throw std::invalid_argument("depthwise_conv: kernel must be square with odd size, got " +
                                    shape_string(kernels.shape()));
    }
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kh) / 2;
    Tensor out({c, h, w});
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                double acc = bias(ci);
                for (std::size_t i = 0; i < kh; ++i) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) +
                                              static_cast<std::ptrdiff_t>(i) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t j = 0; j < kw; ++j) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) +
                                                  static_cast<std::ptrdiff_t>(j) - pad;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                        acc += kernels(ci, i, j) *
                               f(ci, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
                    }
                }
                out(ci, y, x) = acc;
            }
        }
    }
    return out;
}

// Square projection matrices applied as row-vector products (y = x W).
struct AttentionWeights {
    Tensor wq, wk, wv, wo;  // each [d x d]

    static AttentionWeights identity(std::size_t d) {
        return {Tensor::identity(d), Tensor::identity(d), Tensor::identity(d),
                Tensor::identity(d)};
    }
};

// Scaled dot-product attention with `heads` parallel heads over tokens-as-rows
// inputs; scale is 1/sqrt(d/heads); heads are concatenated and projected by wo.
inline Tensor multi_head_cross_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                         std::size_t heads, const AttentionWeights& w) {
    detail::require_rank(q, 2, "multi_head_cross_attention");
    detail::require_rank(k, 2, "multi_head_cross_attention");
    detail::require_rank(v, 2, "multi_head_cross_attention");
    const std::size_t d = q.dim(1);
    if (k.dim(1) != d || v.dim(1) != d) {
        throw std::invalid_argument("multi_head_cross_attention: embedding dims differ: " +
                                    shape_string(q.shape()) + ", " + shape_string(k.shape()) +
                                    ", " + shape_string(v.shape()));
    }
    if (k.dim(0) != v.dim(0)) {
        throw std::invalid_argument("multi_head_cross_attention: key/value counts differ: " +
                                    shape_string(k.shape()) + " vs " + shape_string(v.shape()));
    }
    if (heads == 0 || d % heads != 0) {
        throw std::invalid_argument("multi_head_cross_attention: embedding dim " +
                                    std::to_string(d) + " not divisible by heads " +
                                    std::to_string(heads));
    }
    for (const Tensor* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
        if (m->rank() != 2 || m->dim(0) != d || m->dim(1) != d) {
            throw std::invalid_argument(
                "multi_head_cross_attention: projection weights must be [d x d]");
        }
    }

    const Tensor qp = matmul(q, w.wq);
    const Tensor kp = matmul(k, w.wk);
    const Tensor vp = matmul(v, w.wv);
    const std::size_t nq = q.dim(0), nk = k.dim(0);
    const std::size_t dh = d / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor concat({nq, d});
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        Tensor logits({nq, nk});
        for (std::size_t i = 0; i < nq; ++i) {
            for (std::size_t j = 0; j < nk; ++j) {
                double dot = 0.0;
                for (std::size_t t = 0; t < dh; ++t) dot += qp(i, off + t) * kp(j, off + t);
                logits(i, j) = dot * inv_scale;
            }
        }
        const Tensor attn = softmax_rows(logits);
        for (std::size_t i = 0; i < nq; ++i) {
            for (std::size_t t = 0; t < dh; ++t) {
                double acc = 0.0;
                for (std::size_t j = 0; j < nk; ++j) acc += attn(i, j) * vp(j, off + t);
                concat(i, off + t) = acc;
            }
        }
    }
    return matmul(concat, w.wo);
}

// Text round-trip format: "shape: d1 d2 ...\n" then whitespace-separated
// values, innermost dimension per line.
inline void write_tensor_text(std::ostream& os, const Tensor& t) {
    os << "shape:";
    for (std::size_t d : t.shape()) os << ' ' << d;
    os << '\n';
    const std::size_t row = t.rank() >= 1 ? t.shape().back() : 1;
    std::ostringstream buf;
    buf << std::setprecision(17);
    for (std::size_t i = 0; i < t.size(); ++i) {
        buf << t.data()[i];
        buf << (((i + 1) % std::max<std::size_t>(row, 1) == 0) ? '\n' : ' ');
    }
    os << buf.str();
}

inline Tensor read_tensor_text(std::istream& is) {
    std::string tag;
    is >> tag;
    if (tag != "shape:") throw SchemaError("tensor text: expected 'shape:' header, got '" + tag + "'");
    std::string line;
    std::getline(is, line);
    std::istringstream dims(line);
    std::vector<std::size_t> shape;
    std::size_t d = 0;
    while (dims >> d) shape.push_back(d);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(is >> t.data()[i])) throw SchemaError("tensor text: truncated value list");
    }
    return t;
}

}  // namespace symkit
