#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symkit/common.hpp"
#include "symkit/geometry.hpp"

// Dataset curation: parse text-instance annotations, group them per video and
// instance, split trajectories at frame gaps, drop short tracklets and emit
// self-contained single-object samples (groundtruth.txt + frames.map).

namespace symkit::curation {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct VtsAnnotation {
    std::string video_id;
    int frame_id = 0;
    std::string instance_id;
    std::vector<Point> polygon;
    std::string frame_path;  // optional source image path
};

struct Reject {
    std::size_t line = 0;
    std::string reason;
};

struct ParsedAnnotations {
    std::vector<VtsAnnotation> annotations;
    std::vector<Reject> rejects;
};

// One JSON object per line:
//   {"video_id": "v", "frame_id": 3, "instance_id": "a",
//    "polygon": [[x, y], ...], "frame_path": "v/000003.jpg"}
// frame_path is optional. Malformed records land in the rejects report with
// their 1-based line number; blank lines are skipped.
inline ParsedAnnotations parse_annotations(std::istream& in) {
    if (!in) throw IoError("annotation stream is not readable");
    ParsedAnnotations out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            out.rejects.push_back({line_no, "invalid record: not a JSON object"});
            continue;
        }
        VtsAnnotation ann;
        if (!j.contains("video_id") || !j["video_id"].is_string() ||
            j["video_id"].get<std::string>().empty()) {
            out.rejects.push_back({line_no, "missing or invalid video_id"});
            continue;
        }
        ann.video_id = j["video_id"].get<std::string>();
        if (!j.contains("frame_id") || !j["frame_id"].is_number_integer() ||
            j["frame_id"].get<long long>() < 1) {
            out.rejects.push_back({line_no, "frame_id must be a positive integer"});
            continue;
        }
        ann.frame_id = j["frame_id"].get<int>();
        if (!j.contains("instance_id") || !j["instance_id"].is_string() ||
            j["instance_id"].get<std::string>().empty()) {
            out.rejects.push_back({line_no, "missing or invalid instance_id"});
            continue;
        }
        ann.instance_id = j["instance_id"].get<std::string>();
        bool bad_vertex = false;
        if (j.contains("polygon") && j["polygon"].is_array()) {
            for (const auto& v : j["polygon"]) {
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                    bad_vertex = true;
                    break;
                }
                ann.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
            }
        } else {
            bad_vertex = true;
        }
        if (bad_vertex) {
            out.rejects.push_back({line_no, "polygon must be an array of [x, y] pairs"});
            continue;
        }
        if (ann.polygon.size() < 3) {
            out.rejects.push_back({line_no, "degenerate polygon"});
            continue;
        }
        if (j.contains("frame_path") && j["frame_path"].is_string())
            ann.frame_path = j["frame_path"].get<std::string>();
        out.annotations.push_back(std::move(ann));
    }
    return out;
}

inline ParsedAnnotations parse_annotations_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotation file: " + path.string());
    return parse_annotations(in);
}

struct InstanceGroup {
    std::string video_id;
    std::string instance_id;
    std::vector<VtsAnnotation> annotations;  // strictly frame-sorted
};

// Groups by (video, instance) in first-appearance order and sorts each group
// by frame id. A duplicate (instance, frame) pair is a hard error.
inline std::vector<InstanceGroup> group_and_sort(const std::vector<VtsAnnotation>& anns) {
    std::vector<InstanceGroup> groups;
    for (const VtsAnnotation& a : anns) {
        InstanceGroup* g = nullptr;
        for (InstanceGroup& existing : groups) {
            if (existing.video_id == a.video_id && existing.instance_id == a.instance_id) {
                g = &existing;
                break;
            }
        }
        if (!g) {
            groups.push_back({a.video_id, a.instance_id, {}});
            g = &groups.back();
        }
        g->annotations.push_back(a);
    }
    for (InstanceGroup& g : groups) {
        std::stable_sort(g.annotations.begin(), g.annotations.end(),
                         [](const VtsAnnotation& a, const VtsAnnotation& b) {
                             return a.frame_id < b.frame_id;
                         });
        for (std::size_t i = 1; i < g.annotations.size(); ++i) {
            if (g.annotations[i].frame_id == g.annotations[i - 1].frame_id) {
                throw SchemaError("duplicate annotation for instance '" + g.instance_id +
                                  "' at frame " + std::to_string(g.annotations[i].frame_id) +
                                  " in video '" + g.video_id + "'");
            }
        }
    }
    return groups;
}

// Splits a frame-sorted annotation list into gap-free segments; consecutive
// frame ids inside a segment differ by exactly one.
inline std::vector<std::vector<VtsAnnotation>> split_continuity(
    const std::vector<VtsAnnotation>& sorted) {
    std::vector<std::vector<VtsAnnotation>> segments;
    for (const VtsAnnotation& a : sorted) {
        if (segments.empty() || a.frame_id != segments.back().back().frame_id + 1)
            segments.emplace_back();
        segments.back().push_back(a);
    }
    return segments;
}

enum class LinkMode { Manifest, Copy };

struct CurationConfig {
    int min_length = 5;
    std::filesystem::path output_root;
    LinkMode link_mode = LinkMode::Manifest;
    std::filesystem::path frames_root;  // source images, copy mode only
    bool force = false;
};

struct FilterResult {
    std::vector<std::vector<VtsAnnotation>> kept;
    int discarded = 0;
};

inline FilterResult filter_min_length(std::vector<std::vector<VtsAnnotation>> segments,
                                      const CurationConfig& cfg) {
    FilterResult out;
    for (auto& seg : segments) {
        if (static_cast<int>(seg.size()) >= cfg.min_length)
            out.kept.push_back(std::move(seg));
        else
            ++out.discarded;
    }
    return out;
}

// Minimal enclosing axis-aligned box.
inline BBox polygon_to_bbox(const std::vector<Point>& polygon) {
    if (polygon.size() < 3) throw SchemaError("degenerate polygon: fewer than 3 vertices");
    double min_x = polygon[0].x, max_x = polygon[0].x;
    double min_y = polygon[0].y, max_y = polygon[0].y;
    for (const Point& p : polygon) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    return {min_x, min_y, max_x - min_x, max_y - min_y};
}

struct TrackletFrame {
    int frame_id = 0;
    BBox box;
    std::string frame_path;
};

struct Tracklet {
    std::string source_video;
    std::string instance_id;
    int split_index = 0;
    std::vector<TrackletFrame> frames;

    std::string name() const {
        return source_video + "-" + instance_id + "-" + std::to_string(split_index);
    }
};

inline std::string groundtruth_line(const BBox& b) {
    return format_number(b.x) + "," + format_number(b.y) + "," + format_number(b.w) + "," +
           format_number(b.h);
}

// Writes <output_root>/<video>-<instance>-<split>/ with groundtruth.txt (one
// x,y,w,h line per frame) and frames.map (1-based new index -> original frame
// path). Copy mode additionally materializes re-indexed image files; manifest
// mode never touches image bytes.
inline std::filesystem::path emit_sot_sample(const Tracklet& tracklet,
                                             const CurationConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir = cfg.output_root / tracklet.name();
    if (fs::exists(dir) && !cfg.force)
        throw IoError("output path collision: " + dir.string() + " (use force to overwrite)");
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::ofstream gt(dir / "groundtruth.txt");
    std::ofstream map(dir / "frames.map");
    if (!gt || !map) throw IoError("cannot write sample files under " + dir.string());
    int new_index = 1;
    for (const TrackletFrame& f : tracklet.frames) {
        gt << groundtruth_line(f.box) << '\n';
        const std::string original = !f.frame_path.empty()
                                         ? f.frame_path
                                         : tracklet.source_video + "/" + std::to_string(f.frame_id);
        map << new_index << ' ' << original << '\n';
        if (cfg.link_mode == LinkMode::Copy) {
            if (f.frame_path.empty())
                throw SchemaError("copy mode requires frame_path on every record (tracklet " +
                                  tracklet.name() + ", frame " + std::to_string(f.frame_id) + ")");
            const fs::path src = fs::path(f.frame_path).is_absolute()
                                     ? fs::path(f.frame_path)
                                     : cfg.frames_root / f.frame_path;
            if (!fs::exists(src)) throw IoError("source frame not found: " + src.string());
            char name[32];
            std::snprintf(name, sizeof(name), "%06d", new_index);
            fs::copy_file(src, dir / (std::string(name) + src.extension().string()));
        }
        ++new_index;
    }
    return dir;
}

struct CurationSummary {
    int videos = 0;
    int instances = 0;
    int tracklets = 0;
    int discarded = 0;
    std::vector<Reject> rejects;
    std::vector<std::string> warnings;
    std::vector<std::string> emitted;  // sample directory names, emission order
};

// Full pipeline: parse, group, split, filter, convert, emit.
inline CurationSummary curate(std::istream& in, const CurationConfig& cfg) {
    if (cfg.min_length < 1) throw SchemaError("curation: min_length must be >= 1");
    CurationSummary summary;
    ParsedAnnotations parsed = parse_annotations(in);
    summary.rejects = std::move(parsed.rejects);

    std::set<std::string> videos;
    for (const VtsAnnotation& a : parsed.annotations) videos.insert(a.video_id);
    summary.videos = static_cast<int>(videos.size());

    const std::vector<InstanceGroup> groups = group_and_sort(parsed.annotations);
    summary.instances = static_cast<int>(groups.size());

    for (const InstanceGroup& g : groups) {
        FilterResult filtered = filter_min_length(split_continuity(g.annotations), cfg);
        summary.discarded += filtered.discarded;
        int split_index = 0;
        for (const auto& segment : filtered.kept) {
            Tracklet t;
            t.source_video = g.video_id;
            t.instance_id = g.instance_id;
            t.split_index = split_index++;
            for (const VtsAnnotation& a : segment) {
                const BBox box = polygon_to_bbox(a.polygon);
                if (box.w <= 0.0 || box.h <= 0.0) {
                    summary.warnings.push_back(t.name() + " frame " +
                                               std::to_string(a.frame_id) +
                                               ": zero-area bounding box");
                }
                t.frames.push_back({a.frame_id, box, a.frame_path});
            }
            emit_sot_sample(t, cfg);
            summary.emitted.push_back(t.name());
            ++summary.tracklets;
        }
    }
    return summary;
}

inline CurationSummary curate_file(const std::filesystem::path& input,
                                   const CurationConfig& cfg) {
    std::ifstream in(input);
    if (!in) throw IoError("cannot open annotation file: " + input.string());
    return curate(in, cfg);
}

}  // namespace symkit::curation
