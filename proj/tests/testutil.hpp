#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "symkit/common.hpp"
#include "symkit/geometry.hpp"
#include "symkit/tensor.hpp"

namespace testutil {

// Straight-line attention reference, kept independent of the library path:
// explicit projections, per-head loops and a local softmax.
inline symkit::Tensor naive_attention(const symkit::Tensor& q, const symkit::Tensor& k,
                                      const symkit::Tensor& v, std::size_t heads,
                                      const symkit::AttentionWeights& w) {
    const std::size_t nq = q.dim(0), nk = k.dim(0), d = q.dim(1);
    const std::size_t dh = d / heads;

    auto project = [d](const symkit::Tensor& x, const symkit::Tensor& m) {
        symkit::Tensor out({x.dim(0), d});
        for (std::size_t i = 0; i < x.dim(0); ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t t = 0; t < d; ++t) acc += x(i, t) * m(t, j);
                out(i, j) = acc;
            }
        return out;
    };
    const symkit::Tensor qp = project(q, w.wq);
    const symkit::Tensor kp = project(k, w.wk);
    const symkit::Tensor vp = project(v, w.wv);

    symkit::Tensor concat({nq, d});
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < nq; ++i) {
            std::vector<double> logits(nk);
            double mx = -1e300;
            for (std::size_t j = 0; j < nk; ++j) {
                double dot = 0.0;
                for (std::size_t t = 0; t < dh; ++t) dot += qp(i, h * dh + t) * kp(j, h * dh + t);
                logits[j] = dot / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, logits[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < nk; ++j) z += std::exp(logits[j] - mx);
            for (std::size_t t = 0; t < dh; ++t) {
                double acc = 0.0;
                for (std::size_t j = 0; j < nk; ++j)
                    acc += std::exp(logits[j] - mx) / z * vp(j, h * dh + t);
                concat(i, h * dh + t) = acc;
            }
        }
    }
    return project(concat, w.wo);
}

// Pixel-counting IoU oracle for integer-coordinate boxes: a unit cell (i, j)
// is covered when x <= i < x+w and y <= j < y+h.
inline double raster_iou(const symkit::BBox& a, const symkit::BBox& b, int grid = 160) {
    long long inter = 0, uni = 0;
    for (int j = 0; j < grid; ++j) {
        for (int i = 0; i < grid; ++i) {
            const bool in_a = i >= a.x && i < a.x + a.w && j >= a.y && j < a.y + a.h;
            const bool in_b = i >= b.x && i < b.x + b.w && j >= b.y && j < b.y + b.h;
            inter += in_a && in_b;
            uni += in_a || in_b;
        }
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline symkit::Tensor random_tensor(std::vector<std::size_t> shape, symkit::Rng& rng,
                                    double lo = -2.0, double hi = 2.0) {
    symkit::Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Fresh directory under the system temp root; removed up front so re-runs
// start clean.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "symkit-tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream os(p);
    os << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace testutil
