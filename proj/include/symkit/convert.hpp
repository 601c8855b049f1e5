#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symkit/common.hpp"
#include "symkit/curation.hpp"
#include "symkit/geometry.hpp"

// Converts consolidated multi-object tracking output into one gap-filled
// prediction file per object, and aligns those files with curated
// ground-truth tracklets for evaluation.

namespace symkit::convert {

struct VtsResult {
    std::string video_id;
    int frame_count = 0;
    // object id -> frame-sorted detections, objects in first-appearance order
    std::vector<std::pair<std::string, std::vector<std::pair<int, BBox>>>> detections;
};

// First line is a header object {"video_id": "v", "frame_count": N}; each
// following line is {"object_id": "1", "frame_id": 3, "bbox": [x, y, w, h]}.
inline VtsResult parse_vts_result(std::istream& in) {
    if (!in) throw IoError("result stream is not readable");
    VtsResult out;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw SchemaError("result line " + std::to_string(line_no) + ": not a JSON object");
        if (!have_header) {
            if (!j.contains("video_id") || !j["video_id"].is_string() ||
                !j.contains("frame_count") || !j["frame_count"].is_number_integer() ||
                j["frame_count"].get<long long>() < 1) {
                throw SchemaError("result line " + std::to_string(line_no) +
                                  ": expected header with video_id and positive frame_count");
            }
            out.video_id = j["video_id"].get<std::string>();
            out.frame_count = j["frame_count"].get<int>();
            have_header = true;
            continue;
        }
        if (!j.contains("object_id") || !j["object_id"].is_string() ||
            j["object_id"].get<std::string>().empty())
            throw SchemaError("result line " + std::to_string(line_no) + ": missing object_id");
        if (!j.contains("frame_id") || !j["frame_id"].is_number_integer())
            throw SchemaError("result line " + std::to_string(line_no) + ": missing frame_id");
        if (!j.contains("bbox") || !j["bbox"].is_array() || j["bbox"].size() != 4)
            throw SchemaError("result line " + std::to_string(line_no) +
                              ": bbox must be [x, y, w, h]");
        const std::string object_id = j["object_id"].get<std::string>();
        const int frame_id = j["frame_id"].get<int>();
        if (frame_id < 1 || frame_id > out.frame_count)
            throw SchemaError("result line " + std::to_string(line_no) + ": frame " +
                              std::to_string(frame_id) + " outside [1, " +
                              std::to_string(out.frame_count) + "]");
        const BBox box{j["bbox"][0].get<double>(), j["bbox"][1].get<double>(),
                       j["bbox"][2].get<double>(), j["bbox"][3].get<double>()};
        auto it = std::find_if(out.detections.begin(), out.detections.end(),
                               [&](const auto& p) { return p.first == object_id; });
        if (it == out.detections.end()) {
            out.detections.push_back({object_id, {}});
            it = std::prev(out.detections.end());
        }
        it->second.emplace_back(frame_id, box);
    }
    if (!have_header) throw SchemaError("result stream has no header line");
    for (auto& [object_id, dets] : out.detections) {
        std::stable_sort(dets.begin(), dets.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < dets.size(); ++i)
            if (dets[i].first == dets[i - 1].first)
                throw SchemaError("duplicate detection for object '" + object_id + "' at frame " +
                                  std::to_string(dets[i].first));
    }
    return out;
}

inline VtsResult parse_vts_result_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open result file: " + path.string());
    return parse_vts_result(in);
}

// One box per frame 1..frame_count: the most recent detection at or before
// the frame, and the zero-area placeholder before the first detection.
inline std::vector<BBox> fill_gaps(const std::vector<std::pair<int, BBox>>& detections,
                                   int frame_count) {
    if (frame_count < 1) throw SchemaError("fill_gaps: frame_count must be positive");
    for (std::size_t i = 0; i < detections.size(); ++i) {
        if (detections[i].first < 1 || detections[i].first > frame_count)
            throw SchemaError("fill_gaps: frame " + std::to_string(detections[i].first) +
                              " outside [1, " + std::to_string(frame_count) + "]");
        if (i > 0 && detections[i].first <= detections[i - 1].first)
            throw SchemaError("fill_gaps: detections must be strictly frame-sorted");
    }
    std::vector<BBox> out(static_cast<std::size_t>(frame_count), BBox{0, 0, 0, 0});
    std::size_t next = 0;
    BBox last{0, 0, 0, 0};
    bool seen = false;
    for (int f = 1; f <= frame_count; ++f) {
        if (next < detections.size() && detections[next].first == f) {
            last = detections[next].second;
            seen = true;
            ++next;
        }
        if (seen) out[static_cast<std::size_t>(f - 1)] = last;
    }
    return out;
}

// Writes <out_dir>/<object_id>.txt per object, one x,y,w,h line per frame.
inline std::vector<std::string> emit_predictions(const VtsResult& result,
                                                 const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    for (const auto& [object_id, dets] : result.detections) {
        if (dets.empty())
            throw SchemaError("empty trajectory for object '" + object_id + "'");
        const std::vector<BBox> boxes = fill_gaps(dets, result.frame_count);
        const fs::path file = out_dir / (object_id + ".txt");
        std::ofstream os(file);
        if (!os) throw IoError("cannot write prediction file: " + file.string());
        for (const BBox& b : boxes) os << curation::groundtruth_line(b) << '\n';
        files.push_back(file.filename().string());
    }
    return files;
}

struct PredictionFile {
    std::string object_id;
    std::vector<BBox> boxes;  // one per frame, 1-based frame ids map to index+1
};

inline BBox parse_box_line(const std::string& line, const std::string& context) {
    std::istringstream ss(line);
    double v[4];
    char comma;
    for (int i = 0; i < 4; ++i) {
        if (!(ss >> v[i])) throw SchemaError(context + ": malformed box line '" + line + "'");
        if (i < 3 && !(ss >> comma && comma == ','))
            throw SchemaError(context + ": malformed box line '" + line + "'");
    }
    return {v[0], v[1], v[2], v[3]};
}

inline PredictionFile load_prediction_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prediction file: " + path.string());
    PredictionFile out;
    out.object_id = path.stem().string();
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.boxes.push_back(parse_box_line(line, path.string()));
    }
    return out;
}

struct GtTracklet {
    std::string name;
    std::string video_id;
    std::vector<std::pair<int, BBox>> frames;  // original frame ids, ascending
};

namespace detail {
// Original frame id = trailing digit run of the mapped path's basename
// ("v/12" -> 12, "v/img_000012.jpg" -> 12).
inline int frame_id_from_path(const std::string& path) {
    std::string stem = std::filesystem::path(path).stem().string();
    std::size_t end = stem.size();
    while (end > 0 && std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
    if (end == stem.size())
        throw SchemaError("cannot recover a frame id from mapped path '" + path + "'");
    return std::stoi(stem.substr(end));
}
}  // namespace detail

// Reads one curated sample directory back (groundtruth.txt + frames.map).
inline GtTracklet load_gt_tracklet(const std::filesystem::path& dir) {
    GtTracklet out;
    out.name = dir.filename().string();
    std::ifstream gt(dir / "groundtruth.txt");
    if (!gt) throw IoError("cannot open " + (dir / "groundtruth.txt").string());
    std::vector<BBox> boxes;
    std::string line;
    while (std::getline(gt, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        boxes.push_back(parse_box_line(line, (dir / "groundtruth.txt").string()));
    }
    std::ifstream map(dir / "frames.map");
    if (!map) throw IoError("cannot open " + (dir / "frames.map").string());
    std::vector<std::pair<int, std::string>> entries;
    while (std::getline(map, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        int index = 0;
        std::string path;
        if (!(ss >> index >> path))
            throw SchemaError("malformed frames.map line '" + line + "' in " + dir.string());
        entries.emplace_back(index, path);
    }
    if (entries.size() != boxes.size())
        throw SchemaError("frames.map and groundtruth.txt disagree in " + dir.string());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const std::string& path = entries[i].second;
        out.frames.emplace_back(detail::frame_id_from_path(path), boxes[i]);
        if (out.video_id.empty()) {
            const auto parent = std::filesystem::path(path).parent_path();
            out.video_id = parent.empty() ? "" : parent.string();
        }
    }
    return out;
}

inline std::vector<GtTracklet> load_gt_tree(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::exists(root)) throw IoError("ground-truth root not found: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.txt"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<GtTracklet> out;
    out.reserve(dirs.size());
    for (const fs::path& d : dirs) out.push_back(load_gt_tracklet(d));
    return out;
}

// Argmax-IoU prediction for one frame; an empty pool yields the zero-area
// placeholder with IoU 0, ties resolve to the earliest entry.
inline std::pair<BBox, double> id_agnostic_match(const std::vector<BBox>& frame_predictions,
                                                 const BBox& gt) {
    if (box_area(gt) <= 0.0)
        throw std::invalid_argument("id_agnostic_match: ground-truth box has zero area");
    BBox best{0, 0, 0, 0};
    double best_iou = 0.0;
    bool first = true;
    for (const BBox& p : frame_predictions) {
        const double v = iou(p, gt);
        if (first || v > best_iou) {
            best = p;
            best_iou = v;
            first = false;
        }
    }
    return {best, best_iou};
}

struct EvalPair {
    std::string name;            // ground-truth tracklet name
    std::string matched_object;  // chosen prediction file; empty when none exist
    std::vector<BBox> gt;
    std::vector<BBox> pred;               // same length as gt
    std::vector<std::vector<BBox>> pool;  // per-frame candidates, id-agnostic mode
};

// Pairs every ground-truth tracklet with the prediction file maximizing mean
// IoU over the tracklet's frame span; ties resolve to the earlier file. With
// no predictions at all the pairing is all-zero boxes.
inline std::vector<EvalPair> align_to_gt(const std::vector<PredictionFile>& predictions,
                                         const std::vector<GtTracklet>& gt_tracklets) {
    std::vector<EvalPair> pairs;
    pairs.reserve(gt_tracklets.size());
    for (const GtTracklet& t : gt_tracklets) {
        EvalPair pair;
        pair.name = t.name;
        pair.gt.reserve(t.frames.size());
        for (const auto& [fid, box] : t.frames) pair.gt.push_back(box);

        for (const PredictionFile& p : predictions) {
            for (const auto& [fid, box] : t.frames) {
                if (fid < 1 || static_cast<std::size_t>(fid) > p.boxes.size())
                    throw SchemaError("prediction '" + p.object_id + "' covers " +
                                      std::to_string(p.boxes.size()) + " frames but tracklet '" +
                                      t.name + "' references frame " + std::to_string(fid));
            }
        }
        pair.pool.resize(t.frames.size());
        for (std::size_t i = 0; i < t.frames.size(); ++i) {
            for (const PredictionFile& p : predictions)
                pair.pool[i].push_back(p.boxes[static_cast<std::size_t>(t.frames[i].first - 1)]);
        }

        if (predictions.empty()) {
            pair.pred.assign(t.frames.size(), BBox{0, 0, 0, 0});
        } else {
            std::size_t best = 0;
            double best_mean = -1.0;
            for (std::size_t pi = 0; pi < predictions.size(); ++pi) {
                double sum = 0.0;
                for (const auto& [fid, box] : t.frames)
                    sum += iou(predictions[pi].boxes[static_cast<std::size_t>(fid - 1)], box);
                const double mean = sum / static_cast<double>(t.frames.size());
                if (mean > best_mean) {
                    best_mean = mean;
                    best = pi;
                }
            }
            pair.matched_object = predictions[best].object_id;
            for (const auto& [fid, box] : t.frames)
                pair.pred.push_back(predictions[best].boxes[static_cast<std::size_t>(fid - 1)]);
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

}  // namespace symkit::convert
