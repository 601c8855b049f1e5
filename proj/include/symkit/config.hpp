#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "symkit/aie.hpp"
#include "symkit/common.hpp"
#include "symkit/curation.hpp"
#include "symkit/metrics.hpp"
#include "symkit/simulator.hpp"

// Toolkit configuration: flat "key = value" lines under [section] headers.
// Unknown sections or keys are rejected. Every default equals the module
// defaults, so an empty file is a valid configuration.

namespace symkit {

struct ToolkitConfig {
    AieConfig aie;
    metrics::MetricConfig metric;
    curation::CurationConfig curation;
    sim::SequenceSpec sequence;

    static ToolkitConfig parse(std::istream& in);
    static ToolkitConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file: " + path.string());
        return parse(in);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw SchemaError("config line " + std::to_string(line) + ": expected a number, got '" +
                          v + "'");
    }
}

inline int parse_int(const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        const int i = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw SchemaError("config line " + std::to_string(line) + ": expected an integer, got '" +
                          v + "'");
    }
}

inline bool parse_bool(const std::string& v, std::size_t line) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw SchemaError("config line " + std::to_string(line) + ": expected a boolean, got '" + v +
                      "'");
}

inline std::vector<double> parse_list(const std::string& v, std::size_t line) {
    std::vector<double> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item, line));
    }
    return out;
}

// "frames:vx:vy,frames:vx:vy"
inline std::vector<sim::PiecewiseSegment> parse_segments(const std::string& v, std::size_t line) {
    std::vector<sim::PiecewiseSegment> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::istringstream seg(item);
        std::string frames, vx, vy;
        if (!std::getline(seg, frames, ':') || !std::getline(seg, vx, ':') ||
            !std::getline(seg, vy))
            throw SchemaError("config line " + std::to_string(line) +
                              ": segment must be frames:vx:vy, got '" + item + "'");
        out.push_back({parse_int(trim(frames), line), parse_double(trim(vx), line),
                       parse_double(trim(vy), line)});
    }
    return out;
}

}  // namespace detail

inline ToolkitConfig ToolkitConfig::parse(std::istream& in) {
    ToolkitConfig cfg;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw SchemaError("config line " + std::to_string(line_no) +
                                  ": malformed section header '" + text + "'");
            section = text.substr(1, text.size() - 2);
            if (section != "aie" && section != "metrics" && section != "curation" &&
                section != "simulator")
                throw SchemaError("config line " + std::to_string(line_no) +
                                  ": unknown section '" + section + "'");
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw SchemaError("config line " + std::to_string(line_no) +
                              ": expected key = value, got '" + text + "'");
        const std::string key = detail::trim(text.substr(0, eq));
        const std::string value = detail::trim(text.substr(eq + 1));
        const std::string qualified = section.empty() ? key : section + "." + key;

        if (qualified == "aie.tau_uncert") cfg.aie.tau_uncert = detail::parse_double(value, line_no);
        else if (qualified == "aie.scale_factors") cfg.aie.scale_factors = detail::parse_list(value, line_no);
        else if (qualified == "aie.alpha_kalman") cfg.aie.alpha_kalman = detail::parse_double(value, line_no);
        else if (qualified == "aie.search_factor") cfg.aie.search_factor = detail::parse_double(value, line_no);
        else if (qualified == "aie.process_noise") cfg.aie.process_noise = detail::parse_double(value, line_no);
        else if (qualified == "aie.measurement_noise") cfg.aie.measurement_noise = detail::parse_double(value, line_no);
        else if (qualified == "aie.fuse_into_update") cfg.aie.fuse_into_update = detail::parse_bool(value, line_no);
        else if (qualified == "metrics.iou_threshold_points") {
            const int n = detail::parse_int(value, line_no);
            if (n < 2)
                throw SchemaError("config line " + std::to_string(line_no) +
                                  ": iou_threshold_points must be >= 2");
            cfg.metric.iou_thresholds.clear();
            for (int i = 0; i < n; ++i)
                cfg.metric.iou_thresholds.push_back(static_cast<double>(i) / (n - 1));
        }
        else if (qualified == "metrics.precision_threshold_px") cfg.metric.precision_threshold_px = detail::parse_double(value, line_no);
        else if (qualified == "metrics.norm_precision_threshold") cfg.metric.norm_precision_threshold = detail::parse_double(value, line_no);
        else if (qualified == "metrics.op_threshold") cfg.metric.op_threshold = detail::parse_double(value, line_no);
        else if (qualified == "curation.min_length") cfg.curation.min_length = detail::parse_int(value, line_no);
        else if (qualified == "curation.link_mode") {
            if (value == "manifest") cfg.curation.link_mode = curation::LinkMode::Manifest;
            else if (value == "copy") cfg.curation.link_mode = curation::LinkMode::Copy;
            else
                throw SchemaError("config line " + std::to_string(line_no) +
                                  ": link_mode must be manifest or copy");
        }
        else if (qualified == "simulator.length") cfg.sequence.length = detail::parse_int(value, line_no);
        else if (qualified == "simulator.motion") {
            if (value == "constant-velocity") cfg.sequence.motion = sim::MotionKind::ConstantVelocity;
            else if (value == "scale-ramp") cfg.sequence.motion = sim::MotionKind::ScaleRamp;
            else if (value == "piecewise") cfg.sequence.motion = sim::MotionKind::Piecewise;
            else
                throw SchemaError("config line " + std::to_string(line_no) +
                                  ": motion must be constant-velocity, scale-ramp or piecewise");
        }
        else if (qualified == "simulator.start_cx") cfg.sequence.start_cx = detail::parse_double(value, line_no);
        else if (qualified == "simulator.start_cy") cfg.sequence.start_cy = detail::parse_double(value, line_no);
        else if (qualified == "simulator.vx") cfg.sequence.vx = detail::parse_double(value, line_no);
        else if (qualified == "simulator.vy") cfg.sequence.vy = detail::parse_double(value, line_no);
        else if (qualified == "simulator.width") cfg.sequence.width = detail::parse_double(value, line_no);
        else if (qualified == "simulator.height") cfg.sequence.height = detail::parse_double(value, line_no);
        else if (qualified == "simulator.scale_ramp") cfg.sequence.scale_ramp = detail::parse_double(value, line_no);
        else if (qualified == "simulator.segments") cfg.sequence.segments = detail::parse_segments(value, line_no);
        else if (qualified == "simulator.noise_std") cfg.sequence.noise_std = detail::parse_double(value, line_no);
        else if (qualified == "simulator.distractor_count") cfg.sequence.distractor_count = detail::parse_int(value, line_no);
        else if (qualified == "simulator.distractor_dx") cfg.sequence.distractor_dx = detail::parse_double(value, line_no);
        else if (qualified == "simulator.distractor_dy") cfg.sequence.distractor_dy = detail::parse_double(value, line_no);
        else if (qualified == "simulator.distractor_amplitude") cfg.sequence.distractor_amplitude = detail::parse_double(value, line_no);
        else if (qualified == "simulator.frame_w") cfg.sequence.frame_w = detail::parse_double(value, line_no);
        else if (qualified == "simulator.frame_h") cfg.sequence.frame_h = detail::parse_double(value, line_no);
        else if (qualified == "simulator.seed") cfg.sequence.seed = static_cast<std::uint64_t>(detail::parse_int(value, line_no));
        else if (qualified == "simulator.score_map_size") cfg.sequence.score_map_size = detail::parse_int(value, line_no);
        else if (qualified == "simulator.bump_sigma_factor") cfg.sequence.bump_sigma_factor = detail::parse_double(value, line_no);
        else if (qualified == "simulator.scale_match_sigma") cfg.sequence.scale_match_sigma = detail::parse_double(value, line_no);
        else if (qualified == "simulator.response_noise") cfg.sequence.response_noise = detail::parse_double(value, line_no);
        else if (qualified == "simulator.smoke_features") cfg.sequence.smoke_features = detail::parse_bool(value, line_no);
        else
            throw SchemaError("config line " + std::to_string(line_no) + ": unknown key '" +
                              qualified + "'");
    }
    return cfg;
}

}  // namespace symkit
