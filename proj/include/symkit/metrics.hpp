#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "symkit/common.hpp"
#include "symkit/convert.hpp"
#include "symkit/geometry.hpp"

// Single-object tracking metrics: success AUC over an IoU-threshold grid,
// center-error precision (raw and size-normalized), overlap precision, and
// the per-tracklet/aggregate report.

namespace symkit::metrics {

using symkit::iou;

// 21 points, 0.00 .. 1.00; built as i/20 so the 0.50 grid point is exact.
inline std::vector<double> default_iou_thresholds() {
    std::vector<double> t(21);
    for (int i = 0; i <= 20; ++i) t[static_cast<std::size_t>(i)] = i / 20.0;
    return t;
}

struct MetricConfig {
    std::vector<double> iou_thresholds = default_iou_thresholds();
    double precision_threshold_px = 20.0;
    double norm_precision_threshold = 0.2;
    double op_threshold = 0.75;
};

inline double center_error(const BBox& pred, const BBox& gt) {
    const auto [px, py] = box_center(pred);
    const auto [gx, gy] = box_center(gt);
    return std::hypot(px - gx, py - gy);
}

// Center error in units of the ground-truth box size per axis.
inline double norm_center_error(const BBox& pred, const BBox& gt) {
    if (gt.w <= 0.0 || gt.h <= 0.0)
        throw std::invalid_argument("norm_center_error: degenerate ground-truth box");
    const auto [px, py] = box_center(pred);
    const auto [gx, gy] = box_center(gt);
    const double dx = (px - gx) / gt.w;
    const double dy = (py - gy) / gt.h;
    return std::sqrt(dx * dx + dy * dy);
}

// Mean over the threshold grid of the fraction of frames with IoU >= t.
inline double success_auc(const std::vector<double>& ious, const MetricConfig& cfg) {
    if (ious.empty()) throw std::invalid_argument("success_auc: empty tracklet");
    double acc = 0.0;
    for (double t : cfg.iou_thresholds) {
        std::size_t hits = 0;
        for (double v : ious) hits += v >= t;
        acc += static_cast<double>(hits) / static_cast<double>(ious.size());
    }
    return acc / static_cast<double>(cfg.iou_thresholds.size());
}

inline double precision_at(const std::vector<double>& errors, double threshold) {
    if (errors.empty()) throw std::invalid_argument("precision_at: empty tracklet");
    std::size_t hits = 0;
    for (double e : errors) hits += e <= threshold;
    return static_cast<double>(hits) / static_cast<double>(errors.size());
}

inline double op_at(const std::vector<double>& ious, double threshold) {
    if (ious.empty()) throw std::invalid_argument("op_at: empty tracklet");
    std::size_t hits = 0;
    for (double v : ious) hits += v >= threshold;
    return static_cast<double>(hits) / static_cast<double>(ious.size());
}

enum class EvalMode { StrictId, IdAgnostic };

inline std::string eval_mode_name(EvalMode mode) {
    return mode == EvalMode::StrictId ? "strict-id" : "id-agnostic";
}

inline EvalMode eval_mode_from_name(const std::string& name) {
    if (name == "strict-id") return EvalMode::StrictId;
    if (name == "id-agnostic") return EvalMode::IdAgnostic;
    throw SchemaError("unknown evaluation mode '" + name + "'");
}

struct EvalRow {
    std::string name;
    std::size_t frames = 0;
    double auc = 0.0;
    double p = 0.0;
    double p_norm = 0.0;
    double op75 = 0.0;
    std::vector<double> ious;  // per-frame, kept for curve output
};

struct EvalReport {
    std::vector<EvalRow> rows;
    // unweighted means over tracklets
    double auc = 0.0;
    double p = 0.0;
    double p_norm = 0.0;
    double op75 = 0.0;
};

// Per-tracklet metrics computed frame-wise; id-agnostic mode first re-matches
// every frame against the full prediction pool by highest IoU.
inline EvalReport evaluate(const std::vector<convert::EvalPair>& pairs, const MetricConfig& cfg,
                           EvalMode mode) {
    if (pairs.empty()) throw SchemaError("evaluate: no evaluation pairs");
    EvalReport report;
    for (const convert::EvalPair& pair : pairs) {
        if (pair.pred.size() != pair.gt.size())
            throw SchemaError("evaluate: prediction/ground-truth length mismatch for '" +
                              pair.name + "'");
        EvalRow row;
        row.name = pair.name;
        row.frames = pair.gt.size();
        std::vector<double> errors, norm_errors;
        for (std::size_t i = 0; i < pair.gt.size(); ++i) {
            BBox used = pair.pred[i];
            if (mode == EvalMode::IdAgnostic) {
                const std::vector<BBox>& pool =
                    (i < pair.pool.size() && !pair.pool[i].empty())
                        ? pair.pool[i]
                        : std::vector<BBox>{pair.pred[i]};
                used = convert::id_agnostic_match(pool, pair.gt[i]).first;
            }
            row.ious.push_back(iou(used, pair.gt[i]));
            errors.push_back(center_error(used, pair.gt[i]));
            norm_errors.push_back(norm_center_error(used, pair.gt[i]));
        }
        row.auc = success_auc(row.ious, cfg);
        row.p = precision_at(errors, cfg.precision_threshold_px);
        row.p_norm = precision_at(norm_errors, cfg.norm_precision_threshold);
        row.op75 = op_at(row.ious, cfg.op_threshold);
        report.rows.push_back(std::move(row));
    }
    for (const EvalRow& r : report.rows) {
        report.auc += r.auc;
        report.p += r.p;
        report.p_norm += r.p_norm;
        report.op75 += r.op75;
    }
    const double n = static_cast<double>(report.rows.size());
    report.auc /= n;
    report.p /= n;
    report.p_norm /= n;
    report.op75 /= n;
    return report;
}

// CSV column order is fixed: tracklet,frames,auc,p,p_norm,op75.
inline void write_report_csv(std::ostream& os, const EvalReport& report) {
    os << "tracklet,frames,auc,p,p_norm,op75\n";
    for (const EvalRow& r : report.rows) {
        os << r.name << ',' << r.frames << ',' << format_fixed(r.auc) << ','
           << format_fixed(r.p) << ',' << format_fixed(r.p_norm) << ','
           << format_fixed(r.op75) << '\n';
    }
}

inline void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write report: " + path.string());
    write_report_csv(os, report);
}

inline void write_summary_json(const std::filesystem::path& path, const EvalReport& report,
                               EvalMode mode) {
    nlohmann::ordered_json j;
    j["mode"] = eval_mode_name(mode);
    j["tracklets"] = report.rows.size();
    j["auc"] = report.auc;
    j["p"] = report.p;
    j["p_norm"] = report.p_norm;
    j["op75"] = report.op75;
    std::ofstream os(path);
    if (!os) throw IoError("cannot write summary: " + path.string());
    os << j.dump(2) << '\n';
}

// Aggregate success curve: unweighted mean over tracklets of the per-tracklet
// success fraction at each threshold.
inline void write_success_curve_csv(const std::filesystem::path& path, const EvalReport& report,
                                    const MetricConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write curve: " + path.string());
    os << "iou_threshold,success_rate\n";
    for (double t : cfg.iou_thresholds) {
        double acc = 0.0;
        for (const EvalRow& r : report.rows) {
            std::size_t hits = 0;
            for (double v : r.ious) hits += v >= t;
            acc += static_cast<double>(hits) / static_cast<double>(r.ious.size());
        }
        os << format_fixed(t, 2) << ',' << format_fixed(acc / report.rows.size()) << '\n';
    }
}

}  // namespace symkit::metrics
