#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "symkit/aie.hpp"
#include "symkit/cec.hpp"
#include "symkit/common.hpp"
#include "symkit/geometry.hpp"
#include "symkit/ptr.hpp"

// Synthetic-sequence harness: generates target trajectories (constant
// velocity, scale ramps, piecewise motion) with jitter and distractors,
// synthesizes Gaussian score maps over search regions, runs the tracking
// loop with or without the adaptive inference engine and reports per-frame
// diagnostics.

namespace symkit::sim {

enum class MotionKind { ConstantVelocity, ScaleRamp, Piecewise };

struct PiecewiseSegment {
    int frames = 1;
    double vx = 0.0;
    double vy = 0.0;
};

struct SequenceSpec {
    int length = 60;
    MotionKind motion = MotionKind::ConstantVelocity;
    double start_cx = 640.0;
    double start_cy = 360.0;
    double vx = 2.0;
    double vy = 1.0;
    double width = 16.0;
    double height = 16.0;
    double scale_ramp = 1.03;  // per-frame side multiplier, scale-ramp mode
    std::vector<PiecewiseSegment> segments;
    double noise_std = 0.0;  // center jitter in px
    int distractor_count = 0;
    double distractor_dx = 30.0;  // distractor i sits at (i+1) * offset
    double distractor_dy = 0.0;
    double distractor_amplitude = 0.9;
    double frame_w = 1280.0;
    double frame_h = 720.0;
    std::uint64_t seed = 1;

    // score-map oracle
    int score_map_size = 33;
    double bump_sigma_factor = 0.25;   // bump sigma = factor * sqrt(w*h)
    double scale_match_sigma = 0.1;    // log-scale response falloff
    double response_noise = 0.0;       // per-frame relative bump-amplitude noise
    bool smoke_features = true;        // run the feature-calibration chain per frame

    void validate() const {
        if (length < 2) throw SchemaError("sequence: length must be >= 2");
        if (width <= 0.0 || height <= 0.0)
            throw SchemaError("sequence: target size must be positive");
        if (scale_ramp <= 0.0) throw SchemaError("sequence: scale_ramp must be positive");
        if (noise_std < 0.0) throw SchemaError("sequence: noise_std must be nonnegative");
        if (response_noise < 0.0) throw SchemaError("sequence: response_noise must be nonnegative");
        if (score_map_size < 1) throw SchemaError("sequence: score_map_size must be >= 1");
        if (bump_sigma_factor <= 0.0 || scale_match_sigma <= 0.0)
            throw SchemaError("sequence: oracle sigmas must be positive");
        if (motion == MotionKind::Piecewise) {
            if (segments.empty())
                throw SchemaError("sequence: piecewise motion needs at least one segment");
            for (const auto& s : segments)
                if (s.frames < 1) throw SchemaError("sequence: segment frames must be >= 1");
        }
    }
};

struct SimFrame {
    int frame_id = 0;
    BBox gt;
    std::vector<BBox> distractors;
};

// Deterministic for a fixed seed. Frame 1 sits exactly at the start center;
// jitter draws are consumed every frame so sequences with different
// noise_std share the same stream layout.
inline std::vector<SimFrame> gen_sequence(const SequenceSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<SimFrame> frames;
    frames.reserve(static_cast<std::size_t>(spec.length));

    double cx = spec.start_cx, cy = spec.start_cy;
    double w = spec.width, h = spec.height;
    std::size_t seg = 0;
    int seg_left = spec.segments.empty() ? 0 : spec.segments[0].frames;

    for (int t = 1; t <= spec.length; ++t) {
        if (t > 1) {
            double vx = spec.vx, vy = spec.vy;
            if (spec.motion == MotionKind::Piecewise) {
                while (seg_left == 0 && seg + 1 < spec.segments.size()) {
                    ++seg;
                    seg_left = spec.segments[seg].frames;
                }
                vx = spec.segments[seg].vx;
                vy = spec.segments[seg].vy;
                if (seg_left > 0) --seg_left;
            }
            cx += vx;
            cy += vy;
            if (spec.motion == MotionKind::ScaleRamp) {
                w *= spec.scale_ramp;
                h *= spec.scale_ramp;
            }
        }
        const double jx = rng.normal() * spec.noise_std;
        const double jy = rng.normal() * spec.noise_std;

        SimFrame f;
        f.frame_id = t;
        f.gt = box_from_center(t > 1 ? cx + jx : cx, t > 1 ? cy + jy : cy, w, h);
        for (int d = 0; d < spec.distractor_count; ++d) {
            const auto [gcx, gcy] = box_center(f.gt);
            f.distractors.push_back(box_from_center(gcx + (d + 1) * spec.distractor_dx,
                                                    gcy + (d + 1) * spec.distractor_dy, w, h));
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

// Synthesizes the response a matching-based tracker would produce: a
// Gaussian bump at each object center, attenuated by how far the tracker's
// size hypothesis is from the object's true size (log-scale penalty). The
// target bump peaks at 1.0 under a perfect hypothesis.
struct SyntheticOracle {
    const SequenceSpec& spec;

    double scale_penalty(double true_side, double hypothesis_side) const {
        const double r = std::log(true_side / hypothesis_side);
        return std::exp(-(r * r) / (2.0 * spec.scale_match_sigma * spec.scale_match_sigma));
    }

    ScoreMap score_map(const BBox& search, const SimFrame& frame,
                       std::pair<double, double> hypothesis_wh, double scale_used) const {
        const std::size_t m = static_cast<std::size_t>(spec.score_map_size);
        ScoreMap out{Tensor({m, m}), search, scale_used};
        const double hyp_side = std::sqrt(hypothesis_wh.first * hypothesis_wh.second);

        // Amplitude noise keyed by (seed, frame, scale); each probe of the
        // same frame at the same scale sees the same response.
        Rng noise(spec.seed * 0x9e3779b97f4a7c15ULL +
                  static_cast<std::uint64_t>(frame.frame_id) * 1000003ULL +
                  static_cast<std::uint64_t>(std::llround(scale_used * 1e6)));
        auto perturb = [&](double amp) {
            if (spec.response_noise == 0.0) return amp;
            return std::max(0.0, amp * (1.0 + noise.normal() * spec.response_noise));
        };

        struct Bump {
            double cx, cy, amp, sigma;
        };
        std::vector<Bump> bumps;
        const auto [gcx, gcy] = box_center(frame.gt);
        const double gt_side = std::sqrt(frame.gt.w * frame.gt.h);
        const double sigma = spec.bump_sigma_factor * gt_side;
        bumps.push_back({gcx, gcy, perturb(scale_penalty(gt_side, hyp_side)), sigma});
        for (const BBox& d : frame.distractors) {
            const auto [dcx, dcy] = box_center(d);
            const double d_side = std::sqrt(d.w * d.h);
            bumps.push_back({dcx, dcy,
                             perturb(spec.distractor_amplitude * scale_penalty(d_side, hyp_side)),
                             spec.bump_sigma_factor * d_side});
        }
        for (std::size_t r = 0; r < m; ++r) {
            const double py = search.y + (static_cast<double>(r) + 0.5) * search.h /
                                             static_cast<double>(m);
            for (std::size_t c = 0; c < m; ++c) {
                const double px = search.x + (static_cast<double>(c) + 0.5) * search.w /
                                                 static_cast<double>(m);
                double v = 0.0;
                for (const Bump& b : bumps) {
                    const double dx = px - b.cx, dy = py - b.cy;
                    v = std::max(v, b.amp * std::exp(-(dx * dx + dy * dy) /
                                                     (2.0 * b.sigma * b.sigma)));
                }
                out.scores(r, c) = v;
            }
        }
        return out;
    }

    std::pair<double, double> cell_center(const BBox& search, double row, double col) const {
        const double m = static_cast<double>(spec.score_map_size);
        return {search.x + (col + 0.5) * search.w / m, search.y + (row + 0.5) * search.h / m};
    }
};

namespace detail {

// Parabolic sub-cell refinement around the peak, one axis at a time, on the
// raw (unwindowed) scores. Offsets clamp to half a cell.
inline std::pair<double, double> refine_peak(const Tensor& scores, std::size_t row,
                                             std::size_t col) {
    auto vertex = [](double a, double b, double c) {
        const double denom = a - 2.0 * b + c;
        if (denom >= 0.0) return 0.0;
        return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    };
    double dr = 0.0, dc = 0.0;
    if (row > 0 && row + 1 < scores.dim(0))
        dr = vertex(scores(row - 1, col), scores(row, col), scores(row + 1, col));
    if (col > 0 && col + 1 < scores.dim(1))
        dc = vertex(scores(row, col - 1), scores(row, col), scores(row, col + 1));
    return {static_cast<double>(row) + dr, static_cast<double>(col) + dc};
}

// Shape/range smoke pass over the full feature-calibration chain with
// synthetic tokens; returns the mean absolute calibrated activation.
inline double feature_chain_energy(std::uint64_t seed, int frame_id, const PtrWeights& ptr_w,
                                   const CecWeights& cec_w) {
    Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(frame_id));
    auto fill = [&rng](Tensor t) {
        for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
        return t;
    };
    const Tensor tokens = fill(Tensor({4, 8}));
    const Tensor f_x = fill(Tensor({8, 4, 4}));
    const Tensor z_txt = fill(Tensor({4, 12}));
    const Tensor x_txt = fill(Tensor({16, 12}));

    const RectifiedFeatures ptr_out = apply_ptr(tokens, f_x, ptr_w);
    const CalibratedFeatures cec_out = apply_cec(ptr_out.f_hat, z_txt, x_txt, 4, 4, cec_w);
    for (double v : ptr_out.mask.data())
        if (!(v > 0.0 && v < 1.0)) throw std::logic_error("feature chain: gating mask left (0,1)");
    for (double v : cec_out.m_calib.data())
        if (!(v > 0.0 && v < 1.0))
            throw std::logic_error("feature chain: calibration mask left (0,1)");
    double energy = 0.0;
    for (std::size_t i = 0; i < cec_out.f_calib.size(); ++i) {
        if (std::abs(cec_out.f_calib.data()[i]) > std::abs(f_x.data()[i]))
            throw std::logic_error("feature chain: double gating amplified a feature");
        energy += std::abs(cec_out.f_calib.data()[i]);
    }
    return energy / static_cast<double>(cec_out.f_calib.size());
}

}  // namespace detail

struct SimDiagRow {
    int frame = 0;
    double confidence = 0.0;
    bool rescue_fired = false;
    double scale = 1.0;
    double src = 0.0;
    double feature_energy = 0.0;
};

struct SimResult {
    std::vector<std::pair<int, BBox>> tracklet;  // includes the given first frame
    std::vector<SimDiagRow> diagnostics;         // frames 2..length
    double mean_iou = 0.0;  // over tracked frames
    double mean_src = 0.0;
    int rescues = 0;
};

// Per frame: search window from the current estimate, synthetic score map,
// Hann-window confidence, then either the full engine step or the raw peak.
inline SimResult simulate_track(const SequenceSpec& spec, const AieConfig& aie_cfg,
                                bool use_aie) {
    spec.validate();
    aie_cfg.validate();
    const std::vector<SimFrame> frames = gen_sequence(spec);
    const SyntheticOracle oracle{spec};

    const PtrWeights ptr_w = PtrWeights::seeded(8, 3, spec.seed + 101);
    const CecWeights cec_w = CecWeights::seeded(12, 8, 2, 3, spec.seed + 202);

    SimResult result;
    auto [est_cx, est_cy] = box_center(frames[0].gt);
    double est_w = frames[0].gt.w, est_h = frames[0].gt.h;
    KalmanState state = make_kalman_state(est_cx, est_cy);
    result.tracklet.emplace_back(frames[0].frame_id, frames[0].gt);

    double iou_sum = 0.0, src_sum = 0.0;
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const SimFrame& frame = frames[i];
        auto probe = [&](double scale) {
            ScaleCandidate cand;
            cand.scale = scale;
            cand.search = search_region({est_cx, est_cy}, {est_w, est_h}, scale, aie_cfg);
            const ScoreMap map =
                oracle.score_map(cand.search, frame, {est_w * scale, est_h * scale}, scale);
            const HannPeak peak = hann_confidence(map);
            const auto [rr, rc] = detail::refine_peak(map.scores, peak.row, peak.col);
            const auto [mx, my] = oracle.cell_center(cand.search, rr, rc);
            cand.confidence = peak.confidence;
            cand.box = box_from_center(mx, my, est_w * scale, est_h * scale);
            return cand;
        };
        const ScaleCandidate base = probe(1.0);

        BBox out_box;
        SimDiagRow row;
        row.frame = frame.frame_id;
        if (use_aie) {
            const AieStepResult step = aie_step(state, base, probe, aie_cfg, frame.gt);
            state = step.state;
            out_box = step.box;
            row.confidence = step.diag.confidence;
            row.rescue_fired = step.diag.rescue_fired;
            row.scale = step.diag.scale;
            row.src = step.diag.src.value_or(0.0);
        } else {
            // same center extraction as the engine path, so the two wirings
            // stay bit-identical when the engine is configured off
            const auto c = box_center(base.box);
            out_box = box_from_center(c.first, c.second, base.box.w, base.box.h);
            row.confidence = base.confidence;
            row.src = src(base.search, frame.gt);
        }
        est_cx = box_center(out_box).first;
        est_cy = box_center(out_box).second;
        est_w = out_box.w;
        est_h = out_box.h;

        if (spec.smoke_features)
            row.feature_energy =
                detail::feature_chain_energy(spec.seed, frame.frame_id, ptr_w, cec_w);

        result.tracklet.emplace_back(frame.frame_id, out_box);
        result.diagnostics.push_back(row);
        result.rescues += row.rescue_fired;
        iou_sum += iou(out_box, frame.gt);
        src_sum += row.src;
    }
    const double tracked = static_cast<double>(frames.size() - 1);
    result.mean_iou = iou_sum / tracked;
    result.mean_src = src_sum / tracked;
    return result;
}

// Diagnostics CSV: one row per tracked frame, fixed column order.
inline void write_diagnostics_csv(std::ostream& os, const SimResult& result) {
    os << "frame,confidence,rescue_fired,scale,src,feature_energy\n";
    for (const SimDiagRow& r : result.diagnostics) {
        os << r.frame << ',' << format_fixed(r.confidence) << ',' << (r.rescue_fired ? 1 : 0)
           << ',' << format_fixed(r.scale) << ',' << format_fixed(r.src) << ','
           << format_fixed(r.feature_energy) << '\n';
    }
}

inline void write_diagnostics_csv(const std::filesystem::path& path, const SimResult& result) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write diagnostics: " + path.string());
    write_diagnostics_csv(os, result);
}

struct SweepGrid {
    std::vector<double> taus = {0.97, 0.98, 0.99};
    std::vector<std::vector<double>> scale_sets = {{0.90, 1.10}, {0.95, 1.05}, {0.985, 1.015}};
    std::vector<double> alphas = {0.4, 0.5, 0.6};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct SweepRow {
    double tau = 0.0;
    std::vector<double> scales;
    double alpha = 0.0;
    double mean_iou = 0.0;
    double mean_src = 0.0;
};

// Full cartesian sweep; each cell averages simulate_track over the seeds.
// Row order is tau-major, then scale set, then alpha.
inline std::vector<SweepRow> sweep_aie(const SequenceSpec& base_spec, const AieConfig& base_cfg,
                                       const SweepGrid& grid) {
    if (grid.taus.empty() || grid.scale_sets.empty() || grid.alphas.empty() || grid.seeds.empty())
        throw SchemaError("sweep: grid axes and seeds must be nonempty");
    std::vector<SweepRow> rows;
    for (double tau : grid.taus) {
        for (const auto& scales : grid.scale_sets) {
            for (double alpha : grid.alphas) {
                AieConfig cfg = base_cfg;
                cfg.tau_uncert = tau;
                cfg.scale_factors = scales;
                cfg.alpha_kalman = alpha;
                SweepRow row{tau, scales, alpha, 0.0, 0.0};
                for (std::uint64_t seed : grid.seeds) {
                    SequenceSpec spec = base_spec;
                    spec.seed = seed;
                    const SimResult r = simulate_track(spec, cfg, true);
                    row.mean_iou += r.mean_iou;
                    row.mean_src += r.mean_src;
                }
                row.mean_iou /= static_cast<double>(grid.seeds.size());
                row.mean_src /= static_cast<double>(grid.seeds.size());
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "tau_uncert,scale_factors,alpha_kalman,mean_iou,mean_src\n";
    for (const SweepRow& r : rows) {
        os << format_number(r.tau) << ',';
        for (std::size_t i = 0; i < r.scales.size(); ++i)
            os << (i ? ";" : "") << format_number(r.scales[i]);
        os << ',' << format_number(r.alpha) << ',' << format_fixed(r.mean_iou) << ','
           << format_fixed(r.mean_src) << '\n';
    }
}

inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write sweep table: " + path.string());
    write_sweep_csv(os, rows);
}

}  // namespace symkit::sim
