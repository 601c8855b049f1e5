#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "symkit/common.hpp"
#include "symkit/geometry.hpp"
#include "symkit/tensor.hpp"

// Training-free adaptive inference engine: score-map confidence through a
// Hann window, multi-scale re-search gated on that confidence, and a
// constant-velocity Kalman filter blended into the output center.

namespace symkit {

struct AieConfig {
    double tau_uncert = 0.98;
    std::vector<double> scale_factors = {0.95, 1.05};
    double alpha_kalman = 0.5;
    double search_factor = 4.0;
    double process_noise = 0.01;
    double measurement_noise = 1.0;
    // When false the raw measurement center enters the Kalman update instead
    // of the blended one.
    bool fuse_into_update = true;

    void validate() const {
        if (!(tau_uncert > 0.0 && tau_uncert <= 1.0))
            throw std::invalid_argument("aie config: tau_uncert must be in (0, 1]");
        if (!(alpha_kalman >= 0.0 && alpha_kalman <= 1.0))
            throw std::invalid_argument("aie config: alpha_kalman must be in [0, 1]");
        for (double s : scale_factors)
            if (s <= 0.0) throw std::invalid_argument("aie config: scale factors must be positive");
        if (search_factor <= 0.0)
            throw std::invalid_argument("aie config: search_factor must be positive");
    }
};

// Kinematic state [cx, cy, vx, vy] with a row-major 4x4 covariance.
struct KalmanState {
    std::array<double, 4> s{};
    std::array<double, 16> P{};
};

inline KalmanState make_kalman_state(double cx, double cy) {
    KalmanState st;
    st.s = {cx, cy, 0.0, 0.0};
    st.P = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 10, 0, 0, 0, 0, 10};
    return st;
}

struct ScoreMap {
    Tensor scores;  // [H x W]
    BBox region;    // search window the map was computed over
    double scale_used = 1.0;
};

struct HannPeak {
    double confidence = 0.0;
    std::size_t row = 0;
    std::size_t col = 0;
};

// Symmetric cosine window with zero endpoints; degenerates to {1} for n = 1.
// The upper half mirrors the lower so the window is exactly symmetric.
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    w.front() = 0.0;
    w.back() = 0.0;
    for (std::size_t i = 1; i <= (n - 1) / 2; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * 3.141592653589793238462643383279502884 *
                                     static_cast<double>(i) / static_cast<double>(n - 1)));
        w[n - 1 - i] = w[i];
    }
    return w;
}

// Peak of the score map after multiplying in the separable Hann taper.
// Ties resolve to the smallest row, then the smallest column.
inline HannPeak hann_confidence(const ScoreMap& s) {
    detail::require_rank(s.scores, 2, "hann_confidence");
    const std::size_t h = s.scores.dim(0), w = s.scores.dim(1);
    if (h == 0 || w == 0) throw std::invalid_argument("hann_confidence: empty score map");
    const std::vector<double> wr = hann_window(h);
    const std::vector<double> wc = hann_window(w);
    HannPeak best{s.scores(0, 0) * wr[0] * wc[0], 0, 0};
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const double v = s.scores(r, c) * wr[r] * wc[c];
            if (v > best.confidence) best = {v, r, c};
        }
    }
    return best;
}

inline bool needs_rescue(double confidence, const AieConfig& cfg) {
    return confidence < cfg.tau_uncert;
}

struct ScaleCandidate {
    double confidence = 0.0;
    BBox box;
    double scale = 1.0;
    BBox search;  // region the candidate's score map covered; used for SRC
};

// Argmax over confidence; ties prefer scale 1.0, then the earlier entry.
inline ScaleCandidate multiscale_select(const std::vector<ScaleCandidate>& candidates) {
    if (candidates.empty())
        throw std::invalid_argument("multiscale_select: empty candidate list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const bool better = candidates[i].confidence > candidates[best].confidence;
        const bool tie = candidates[i].confidence == candidates[best].confidence;
        if (better || (tie && candidates[i].scale == 1.0 && candidates[best].scale != 1.0))
            best = i;
    }
    return candidates[best];
}

namespace detail {
inline std::array<double, 16> mat4_mul(const std::array<double, 16>& a,
                                       const std::array<double, 16>& b) {
    std::array<double, 16> c{};
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) {
            const double av = a[i * 4 + k];
            if (av == 0.0) continue;
            for (int j = 0; j < 4; ++j) c[i * 4 + j] += av * b[k * 4 + j];
        }
    return c;
}

inline std::array<double, 16> mat4_transpose(const std::array<double, 16>& a) {
    std::array<double, 16> t{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) t[j * 4 + i] = a[i * 4 + j];
    return t;
}

// dt = 1 frame
inline constexpr std::array<double, 16> kCvTransition = {1, 0, 1, 0, 0, 1, 0, 1,
                                                         0, 0, 1, 0, 0, 0, 0, 1};
}  // namespace detail

// s' = F s, P' = F P F^T + qI with the constant-velocity transition.
inline KalmanState kalman_predict(const KalmanState& state, double q) {
    KalmanState out;
    out.s = {state.s[0] + state.s[2], state.s[1] + state.s[3], state.s[2], state.s[3]};
    out.P = detail::mat4_mul(detail::mat4_mul(detail::kCvTransition, state.P),
                             detail::mat4_transpose(detail::kCvTransition));
    for (int i = 0; i < 4; ++i) out.P[i * 4 + i] += q;
    return out;
}

// Position-only observation, R = rI2, posterior covariance (I - K H) P.
inline KalmanState kalman_update(const KalmanState& state, std::pair<double, double> z, double r) {
    const auto& P = state.P;
    const double s00 = P[0] + r, s01 = P[1];
    const double s10 = P[4], s11 = P[5] + r;
    const double det = s00 * s11 - s01 * s10;
    if (std::abs(det) < 1e-300)
        throw std::runtime_error("kalman_update: singular innovation covariance");
    const double i00 = s11 / det, i01 = -s01 / det, i10 = -s10 / det, i11 = s00 / det;

    // K = P H^T S^-1; P H^T is the first two columns of P
    std::array<double, 8> K{};
    for (int i = 0; i < 4; ++i) {
        K[i * 2 + 0] = P[i * 4 + 0] * i00 + P[i * 4 + 1] * i10;
        K[i * 2 + 1] = P[i * 4 + 0] * i01 + P[i * 4 + 1] * i11;
    }
    const double y0 = z.first - state.s[0];
    const double y1 = z.second - state.s[1];

    KalmanState out;
    for (int i = 0; i < 4; ++i) out.s[i] = state.s[i] + K[i * 2] * y0 + K[i * 2 + 1] * y1;

    std::array<double, 16> ikh{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            ikh[i * 4 + j] = (i == j ? 1.0 : 0.0) - (j < 2 ? K[i * 2 + j] : 0.0);
    out.P = detail::mat4_mul(ikh, P);
    // symmetrize away rounding drift
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            const double m = 0.5 * (out.P[i * 4 + j] + out.P[j * 4 + i]);
            out.P[i * 4 + j] = m;
            out.P[j * 4 + i] = m;
        }
    return out;
}

// Convex blend of the measured center and the motion prediction.
inline std::pair<double, double> fuse_estimate(std::pair<double, double> z_center,
                                               std::pair<double, double> predicted_center,
                                               double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("fuse_estimate: alpha must be in [0, 1]");
    return {alpha * z_center.first + (1.0 - alpha) * predicted_center.first,
            alpha * z_center.second + (1.0 - alpha) * predicted_center.second};
}

// Square window of side search_factor * sqrt(w*h) * scale around the center.
// May extend beyond frame bounds; clipping is the caller's choice.
inline BBox search_region(std::pair<double, double> center, std::pair<double, double> target_wh,
                          double scale, const AieConfig& cfg) {
    if (target_wh.first <= 0.0 || target_wh.second <= 0.0)
        throw std::invalid_argument("search_region: target size must be positive");
    const double side = cfg.search_factor * std::sqrt(target_wh.first * target_wh.second) * scale;
    return box_from_center(center.first, center.second, side, side);
}

// Search-region coverage: how much of the ground truth the window contains.
inline double src(const BBox& b_search, const BBox& b_gt) {
    const double gt_area = box_area(b_gt);
    if (gt_area <= 0.0) throw std::invalid_argument("src: ground-truth box has zero area");
    return intersection_area(b_search, b_gt) / gt_area;
}

struct AieDiagnostics {
    double confidence = 0.0;
    bool rescue_fired = false;
    double scale = 1.0;
    std::optional<double> src;
};

struct AieStepResult {
    BBox box;
    KalmanState state;
    AieDiagnostics diag;
};

using CandidateProvider = std::function<ScaleCandidate(double scale)>;

// One inference step: rescue via the provider when the base confidence falls
// below the threshold, pick the best candidate, blend its center with the
// constant-velocity prediction, feed the filter, and emit the selected box
// size at the blended center.
inline AieStepResult aie_step(const KalmanState& state, const ScaleCandidate& base,
                              const CandidateProvider& provider, const AieConfig& cfg,
                              const std::optional<BBox>& gt = std::nullopt) {
    cfg.validate();
    std::vector<ScaleCandidate> candidates{base};
    // Rescue fires only when an alternative scale is actually probed.
    const bool rescue = needs_rescue(base.confidence, cfg) && !cfg.scale_factors.empty();
    if (rescue) {
        if (!provider)
            throw std::invalid_argument("aie_step: rescue requires a candidate provider");
        for (double s : cfg.scale_factors) candidates.push_back(provider(s));
    }
    const ScaleCandidate selected = multiscale_select(candidates);

    const KalmanState predicted = kalman_predict(state, cfg.process_noise);
    const auto measured = box_center(selected.box);
    const auto fused =
        fuse_estimate(measured, {predicted.s[0], predicted.s[1]}, cfg.alpha_kalman);
    const auto update_with = cfg.fuse_into_update ? fused : measured;
    const KalmanState posterior = kalman_update(predicted, update_with, cfg.measurement_noise);

    AieStepResult out;
    out.box = box_from_center(fused.first, fused.second, selected.box.w, selected.box.h);
    out.state = posterior;
    out.diag.confidence = selected.confidence;
    out.diag.rescue_fired = rescue;
    out.diag.scale = selected.scale;
    if (gt && box_area(*gt) > 0.0) out.diag.src = src(selected.search, *gt);
    return out;
}

}  // namespace symkit
