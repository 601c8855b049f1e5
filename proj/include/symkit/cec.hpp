#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "symkit/common.hpp"
#include "symkit/tensor.hpp"
#include "symkit/weights_io.hpp"

// Cross-expert calibration: textual-expert token features from template and
// search are projected into a shared low-dimensional space, the search tokens
// are enhanced by template-guided cross-attention, and a convolutional head
// turns the fused tokens into a spatial calibration mask multiplied onto the
// rectified search features.

namespace symkit {

struct CecWeights {
    Tensor proj_w;  // [d x C_txt], shared by template and search tokens
    Tensor proj_b;  // [d]
    AttentionWeights attn;
    std::size_t heads = 4;
    Tensor ln_gamma;  // [d]
    Tensor ln_beta;   // [d]
    double ln_eps = 1e-5;
    Tensor head_w;  // [1 x d x k x k] convolutional mask head
    Tensor head_b;  // [1]

    // Zero weights with unit layer-norm gain: the head emits sigmoid(0) = 0.5
    // everywhere.
    static CecWeights neutral(std::size_t txt_dim, std::size_t d = 256, std::size_t heads = 4,
                              std::size_t head_kernel = 3) {
        CecWeights w;
        w.proj_w = Tensor({d, txt_dim});
        w.proj_b = Tensor({d});
        w.attn = {Tensor({d, d}), Tensor({d, d}), Tensor({d, d}), Tensor({d, d})};
        w.heads = heads;
        w.ln_gamma = Tensor({d}, std::vector<double>(d, 1.0));
        w.ln_beta = Tensor({d});
        w.head_w = Tensor({1, d, head_kernel, head_kernel});
        w.head_b = Tensor({1});
        return w;
    }

    static CecWeights seeded(std::size_t txt_dim, std::size_t d = 256, std::size_t heads = 4,
                             std::size_t head_kernel = 3,
                             std::uint64_t seed = kDefaultWeightSeed) {
        CecWeights w = neutral(txt_dim, d, heads, head_kernel);
        Rng rng(seed);
        const double pb = 1.0 / std::sqrt(static_cast<double>(txt_dim));
        for (double& v : w.proj_w.data()) v = rng.uniform(-pb, pb);
        const double ab = 1.0 / std::sqrt(static_cast<double>(d));
        for (Tensor* m : {&w.attn.wq, &w.attn.wk, &w.attn.wv, &w.attn.wo})
            for (double& v : m->data()) v = rng.uniform(-ab, ab);
        const double hb = 1.0 / static_cast<double>(head_kernel * head_kernel);
        for (double& v : w.head_w.data()) v = rng.uniform(-hb, hb);
        return w;
    }
};

struct CalibratedFeatures {
    Tensor f_calib;  // [C x H x W]
    Tensor m_calib;  // [H x W], values strictly in (0, 1)
};

// Shared linear projection: identical rows in either token set map to
// identical outputs.
inline std::pair<Tensor, Tensor> project_textual(const Tensor& z_txt, const Tensor& x_txt,
                                                 const CecWeights& w) {
    detail::require_rank(z_txt, 2, "project_textual");
    detail::require_rank(x_txt, 2, "project_textual");
    const std::size_t txt_dim = w.proj_w.dim(1), d = w.proj_w.dim(0);
    if (z_txt.dim(1) != txt_dim || x_txt.dim(1) != txt_dim) {
        throw std::invalid_argument("project_textual: token dim mismatch with projection " +
                                    shape_string(w.proj_w.shape()));
    }
    auto project = [&](const Tensor& tokens) {
        Tensor out({tokens.dim(0), d});
        for (std::size_t i = 0; i < tokens.dim(0); ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double acc = w.proj_b(j);
                for (std::size_t t = 0; t < txt_dim; ++t) acc += w.proj_w(j, t) * tokens(i, t);
                out(i, j) = acc;
            }
        return out;
    };
    return {project(z_txt), project(x_txt)};
}

// X_fused = LayerNorm(x_proj + CrossAttention(q = x_proj, k = v = z_proj))
inline Tensor enhance(const Tensor& x_proj, const Tensor& z_proj, const CecWeights& w) {
    const Tensor attended = multi_head_cross_attention(x_proj, z_proj, z_proj, w.heads, w.attn);
    return layer_norm(add(x_proj, attended), w.ln_gamma, w.ln_beta, w.ln_eps);
}

namespace detail {

// Full 2-D convolution collapsing d channels to one plane, zero padding,
// stride 1, odd kernel.
inline Tensor conv_head(const Tensor& grid, const Tensor& head_w, const Tensor& head_b) {
    const std::size_t d = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
    if (head_w.rank() != 4 || head_w.dim(0) != 1 || head_w.dim(1) != d ||
        head_w.dim(2) != head_w.dim(3) || head_w.dim(2) % 2 == 0) {
        throw std::invalid_argument("conv head weights must be [1 x d x k x k] with odd k, got " +
                                    shape_string(head_w.shape()));
    }
    const std::size_t k = head_w.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k) / 2;
    Tensor out({h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = head_b(0);
            for (std::size_t c = 0; c < d; ++c) {
                for (std::size_t i = 0; i < k; ++i) {
                    const std::ptrdiff_t sy =
                        static_cast<std::ptrdiff_t>(y) + static_cast<std::ptrdiff_t>(i) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::ptrdiff_t sx =
                            static_cast<std::ptrdiff_t>(x) + static_cast<std::ptrdiff_t>(j) - pad;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                        acc += head_w(0, c, i, j) *
                               grid(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
                    }
                }
            }
            out(y, x) = acc;
        }
    }
    return out;
}

inline Tensor resample_nearest(const Tensor& m, std::size_t out_h, std::size_t out_w) {
    if (m.dim(0) == out_h && m.dim(1) == out_w) return m;
    Tensor out({out_h, out_w});
    for (std::size_t y = 0; y < out_h; ++y) {
        const std::size_t sy = y * m.dim(0) / out_h;
        for (std::size_t x = 0; x < out_w; ++x) {
            out(y, x) = m(sy, x * m.dim(1) / out_w);
        }
    }
    return out;
}

}  // namespace detail

// Reshapes the fused tokens row-major onto the search grid, runs the conv
// head and gates through a logistic. Resampled (nearest-neighbor) to
// out_h x out_w when that differs from the token grid; 0 means "same".
inline Tensor calibration_mask(const Tensor& x_fused, std::size_t grid_h, std::size_t grid_w,
                               const CecWeights& w, std::size_t out_h = 0, std::size_t out_w = 0) {
    detail::require_rank(x_fused, 2, "calibration_mask");
    if (x_fused.dim(0) != grid_h * grid_w) {
        throw std::invalid_argument("calibration_mask: " + std::to_string(x_fused.dim(0)) +
                                    " tokens do not fill a " + std::to_string(grid_h) + "x" +
                                    std::to_string(grid_w) + " grid");
    }
    const std::size_t d = x_fused.dim(1);
    Tensor grid({d, grid_h, grid_w});
    for (std::size_t r = 0; r < grid_h; ++r)
        for (std::size_t c = 0; c < grid_w; ++c)
            for (std::size_t f = 0; f < d; ++f) grid(f, r, c) = x_fused(r * grid_w + c, f);
    const Tensor mask = sigmoid(detail::conv_head(grid, w.head_w, w.head_b));
    return detail::resample_nearest(mask, out_h ? out_h : grid_h, out_w ? out_w : grid_w);
}

// F_calib = f_hat * m_calib, the mask broadcast across channels.
inline CalibratedFeatures fuse_calibrated(const Tensor& f_hat, const Tensor& m_calib) {
    detail::require_rank(f_hat, 3, "fuse_calibrated");
    detail::require_rank(m_calib, 2, "fuse_calibrated");
    if (m_calib.dim(0) != f_hat.dim(1) || m_calib.dim(1) != f_hat.dim(2)) {
        throw std::invalid_argument("fuse_calibrated: mask " + shape_string(m_calib.shape()) +
                                    " does not match features " + shape_string(f_hat.shape()));
    }
    CalibratedFeatures out{Tensor(f_hat.shape()), m_calib};
    for (std::size_t c = 0; c < f_hat.dim(0); ++c)
        for (std::size_t y = 0; y < f_hat.dim(1); ++y)
            for (std::size_t x = 0; x < f_hat.dim(2); ++x)
                out.f_calib(c, y, x) = f_hat(c, y, x) * m_calib(y, x);
    return out;
}

inline CalibratedFeatures apply_cec(const Tensor& f_hat, const Tensor& z_txt, const Tensor& x_txt,
                                    std::size_t grid_h, std::size_t grid_w, const CecWeights& w) {
    const auto [z_proj, x_proj] = project_textual(z_txt, x_txt, w);
    const Tensor fused = enhance(x_proj, z_proj, w);
    const Tensor mask = calibration_mask(fused, grid_h, grid_w, w, f_hat.dim(1), f_hat.dim(2));
    return fuse_calibrated(f_hat, mask);
}

inline void save_cec_weights(const std::filesystem::path& path, const CecWeights& w) {
    write_weights_file(path,
                       {{"heads", std::to_string(w.heads)}, {"ln_eps", format_number(w.ln_eps)}},
                       {{"proj.weight", w.proj_w},
                        {"proj.bias", w.proj_b},
                        {"attn.wq", w.attn.wq},
                        {"attn.wk", w.attn.wk},
                        {"attn.wv", w.attn.wv},
                        {"attn.wo", w.attn.wo},
                        {"ln.gamma", w.ln_gamma},
                        {"ln.beta", w.ln_beta},
                        {"head.weight", w.head_w},
                        {"head.bias", w.head_b}});
}

inline CecWeights load_cec_weights(const std::filesystem::path& path) {
    const WeightsFile file = read_weights_file(path);
    CecWeights w;
    w.heads = static_cast<std::size_t>(std::stoul(file.meta_value("heads", "4")));
    w.ln_eps = std::stod(file.meta_value("ln_eps", "1e-5"));
    w.proj_w = file.get("proj.weight");
    w.proj_b = file.get("proj.bias");
    w.attn = {file.get("attn.wq"), file.get("attn.wk"), file.get("attn.wv"), file.get("attn.wo")};
    w.ln_gamma = file.get("ln.gamma");
    w.ln_beta = file.get("ln.beta");
    w.head_w = file.get("head.weight");
    w.head_b = file.get("head.bias");
    return w;
}

}  // namespace symkit
