#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "symkit/curation.hpp"
#include "testutil.hpp"

using namespace symkit::curation;
using symkit::BBox;

namespace {

std::string rect_record(const std::string& video, int frame, const std::string& instance,
                        double x, double y, double w, double h) {
    std::ostringstream os;
    os << "{\"video_id\":\"" << video << "\",\"frame_id\":" << frame << ",\"instance_id\":\""
       << instance << "\",\"polygon\":[[" << x << "," << y << "],[" << x + w << "," << y << "],["
       << x + w << "," << y + h << "],[" << x << "," << y + h << "]]}";
    return os.str();
}

VtsAnnotation ann(const std::string& video, int frame, const std::string& instance) {
    VtsAnnotation a;
    a.video_id = video;
    a.frame_id = frame;
    a.instance_id = instance;
    a.polygon = {{0, 0}, {1, 0}, {0, 1}};
    return a;
}

}  // namespace

TEST_CASE("parse_annotations", "[curation]") {
    SECTION("empty input yields nothing") {
        std::istringstream in("");
        const auto parsed = parse_annotations(in);
        REQUIRE(parsed.annotations.empty());
        REQUIRE(parsed.rejects.empty());
    }
    SECTION("one valid record") {
        std::istringstream in(rect_record("vid", 3, "a", 1, 2, 10, 20) + "\n");
        const auto parsed = parse_annotations(in);
        REQUIRE(parsed.annotations.size() == 1);
        REQUIRE(parsed.annotations[0].video_id == "vid");
        REQUIRE(parsed.annotations[0].frame_id == 3);
        REQUIRE(parsed.annotations[0].polygon.size() == 4);
    }
    SECTION("two-vertex polygon is rejected with a reason, not dropped") {
        std::istringstream in(
            "{\"video_id\":\"v\",\"frame_id\":1,\"instance_id\":\"a\",\"polygon\":[[0,0],[1,1]]}\n");
        const auto parsed = parse_annotations(in);
        REQUIRE(parsed.annotations.empty());
        REQUIRE(parsed.rejects.size() == 1);
        REQUIRE(parsed.rejects[0].line == 1);
        REQUIRE(parsed.rejects[0].reason == "degenerate polygon");
    }
    SECTION("malformed lines collect reasons with line numbers") {
        std::istringstream in("not json\n\n" + rect_record("v", 1, "a", 0, 0, 5, 5) +
                              "\n{\"video_id\":\"v\",\"frame_id\":0,\"instance_id\":\"a\","
                              "\"polygon\":[[0,0],[1,0],[0,1]]}\n");
        const auto parsed = parse_annotations(in);
        REQUIRE(parsed.annotations.size() == 1);
        REQUIRE(parsed.rejects.size() == 2);
        REQUIRE(parsed.rejects[0].line == 1);
        REQUIRE(parsed.rejects[1].line == 4);
        REQUIRE(parsed.rejects[1].reason == "frame_id must be a positive integer");
    }
}

TEST_CASE("group_and_sort", "[curation]") {
    SECTION("frames arriving out of order are sorted") {
        const auto groups = group_and_sort({ann("v", 3, "a"), ann("v", 1, "a"), ann("v", 2, "a")});
        REQUIRE(groups.size() == 1);
        REQUIRE(groups[0].annotations[0].frame_id == 1);
        REQUIRE(groups[0].annotations[2].frame_id == 3);
    }
    SECTION("interleaved instances form separate groups in first-appearance order") {
        const auto groups =
            group_and_sort({ann("v", 1, "b"), ann("v", 1, "a"), ann("v", 2, "b")});
        REQUIRE(groups.size() == 2);
        REQUIRE(groups[0].instance_id == "b");
        REQUIRE(groups[0].annotations.size() == 2);
        REQUIRE(groups[1].instance_id == "a");
    }
    SECTION("duplicate (instance, frame) is an error naming both") {
        REQUIRE_THROWS_WITH(group_and_sort({ann("v", 7, "A"), ann("v", 7, "A")}),
                            Catch::Matchers::ContainsSubstring("A") &&
                                Catch::Matchers::ContainsSubstring("7"));
    }
}

TEST_CASE("split_continuity", "[curation]") {
    SECTION("gap splits the trajectory") {
        const auto segs = split_continuity(
            {ann("v", 1, "a"), ann("v", 2, "a"), ann("v", 3, "a"), ann("v", 5, "a"),
             ann("v", 6, "a")});
        REQUIRE(segs.size() == 2);
        REQUIRE(segs[0].size() == 3);
        REQUIRE(segs[1].size() == 2);
        REQUIRE(segs[1][0].frame_id == 5);
    }
    SECTION("gap-free input stays one segment") {
        const auto segs = split_continuity({ann("v", 1, "a"), ann("v", 2, "a"), ann("v", 3, "a"),
                                            ann("v", 4, "a"), ann("v", 5, "a")});
        REQUIRE(segs.size() == 1);
        REQUIRE(segs[0].size() == 5);
    }
    SECTION("single frame is a length-1 segment") {
        const auto segs = split_continuity({ann("v", 9, "a")});
        REQUIRE(segs.size() == 1);
        REQUIRE(segs[0].size() == 1);
    }
    SECTION("splitting is lossless on random frame sets") {
        symkit::Rng rng(51);
        for (int trial = 0; trial < 30; ++trial) {
            std::set<int> frames;
            const int n = 1 + int(rng.next_u64() % 20);
            for (int i = 0; i < n; ++i) frames.insert(1 + int(rng.next_u64() % 40));
            std::vector<VtsAnnotation> anns;
            for (int f : frames) anns.push_back(ann("v", f, "a"));
            const auto segs = split_continuity(anns);
            std::set<int> reassembled;
            for (const auto& seg : segs) {
                for (std::size_t i = 1; i < seg.size(); ++i)
                    REQUIRE(seg[i].frame_id == seg[i - 1].frame_id + 1);
                for (const auto& a : seg) reassembled.insert(a.frame_id);
            }
            REQUIRE(reassembled == frames);
        }
    }
}

TEST_CASE("filter_min_length", "[curation]") {
    CurationConfig cfg;
    auto seg = [](int len) {
        std::vector<VtsAnnotation> s;
        for (int i = 1; i <= len; ++i) s.push_back(ann("v", i, "a"));
        return s;
    };

    SECTION("default threshold keeps lengths >= 5") {
        const auto out = filter_min_length({seg(3), seg(5), seg(7)}, cfg);
        REQUIRE(out.kept.size() == 2);
        REQUIRE(out.discarded == 1);
        REQUIRE(out.kept[0].size() == 5);
    }
    SECTION("threshold 1 keeps everything") {
        cfg.min_length = 1;
        const auto out = filter_min_length({seg(1), seg(2)}, cfg);
        REQUIRE(out.kept.size() == 2);
        REQUIRE(out.discarded == 0);
    }
    SECTION("all short leaves empty output with the discard count") {
        const auto out = filter_min_length({seg(1), seg(4)}, cfg);
        REQUIRE(out.kept.empty());
        REQUIRE(out.discarded == 2);
    }
}

TEST_CASE("polygon_to_bbox", "[curation]") {
    SECTION("axis-aligned rectangle is a fixed point") {
        const BBox b = polygon_to_bbox({{2, 3}, {7, 3}, {7, 13}, {2, 13}});
        REQUIRE(b == BBox{2, 3, 5, 10});
    }
    SECTION("triangle") {
        const BBox b = polygon_to_bbox({{0, 0}, {4, 0}, {0, 3}});
        REQUIRE(b == BBox{0, 0, 4, 3});
    }
    SECTION("collinear vertices give a zero-height box") {
        const BBox b = polygon_to_bbox({{0, 0}, {1, 0}, {2, 0}});
        REQUIRE(b == BBox{0, 0, 2, 0});
    }
    SECTION("fewer than 3 vertices rejected") {
        REQUIRE_THROWS_AS(polygon_to_bbox({{0, 0}, {1, 1}}), symkit::SchemaError);
    }
}

TEST_CASE("emit_sot_sample", "[curation]") {
    const auto dir = testutil::temp_dir("emit_sample");
    CurationConfig cfg;
    cfg.output_root = dir;

    Tracklet t;
    t.source_video = "vid";
    t.instance_id = "a";
    t.split_index = 0;
    for (int f = 4; f <= 8; ++f) t.frames.push_back({f, BBox{1.0 * f, 2, 3, 4}, ""});

    SECTION("five frames produce five lines in both files") {
        const auto sample = emit_sot_sample(t, cfg);
        REQUIRE(sample.filename() == "vid-a-0");
        const std::string gt = testutil::read_file(sample / "groundtruth.txt");
        REQUIRE(gt == "4,2,3,4\n5,2,3,4\n6,2,3,4\n7,2,3,4\n8,2,3,4\n");
        const std::string map = testutil::read_file(sample / "frames.map");
        REQUIRE(map == "1 vid/4\n2 vid/5\n3 vid/6\n4 vid/7\n5 vid/8\n");
    }
    SECTION("re-running collides unless forced") {
        emit_sot_sample(t, cfg);
        REQUIRE_THROWS_AS(emit_sot_sample(t, cfg), symkit::IoError);
        cfg.force = true;
        REQUIRE_NOTHROW(emit_sot_sample(t, cfg));
    }
}

TEST_CASE("curate end to end", "[curation]") {
    CurationConfig cfg;

    SECTION("gap-free instance yields one tracklet") {
        cfg.output_root = testutil::temp_dir("curate_one");
        std::ostringstream input;
        for (int f = 1; f <= 6; ++f) input << rect_record("vid", f, "a", f, 0, 10, 10) << "\n";
        std::istringstream in(input.str());
        const auto summary = curate(in, cfg);
        REQUIRE(summary.videos == 1);
        REQUIRE(summary.instances == 1);
        REQUIRE(summary.tracklets == 1);
        REQUIRE(summary.discarded == 0);
        const std::string gt = testutil::read_file(cfg.output_root / "vid-a-0/groundtruth.txt");
        REQUIRE(gt == "1,0,10,10\n2,0,10,10\n3,0,10,10\n4,0,10,10\n5,0,10,10\n6,0,10,10\n");
    }
    SECTION("both segments below the default threshold are discarded") {
        cfg.output_root = testutil::temp_dir("curate_short");
        std::ostringstream input;
        for (int f : {1, 2, 3, 5, 6}) input << rect_record("vid", f, "a", f, 0, 10, 10) << "\n";
        std::istringstream in(input.str());
        const auto summary = curate(in, cfg);
        REQUIRE(summary.tracklets == 0);
        REQUIRE(summary.discarded == 2);
    }
    SECTION("lower threshold emits both splits with suffixes -0 and -1") {
        cfg.output_root = testutil::temp_dir("curate_splits");
        cfg.min_length = 2;
        std::ostringstream input;
        for (int f : {1, 2, 3, 5, 6}) input << rect_record("vid", f, "a", 10 + f, 20, 30, 40) << "\n";
        std::istringstream in(input.str());
        const auto summary = curate(in, cfg);
        REQUIRE(summary.tracklets == 2);
        REQUIRE(summary.emitted == std::vector<std::string>{"vid-a-0", "vid-a-1"});
        REQUIRE(testutil::read_file(cfg.output_root / "vid-a-0/groundtruth.txt") ==
                "11,20,30,40\n12,20,30,40\n13,20,30,40\n");
        REQUIRE(testutil::read_file(cfg.output_root / "vid-a-1/groundtruth.txt") ==
                "15,20,30,40\n16,20,30,40\n");
    }
    SECTION("empty input yields a zero summary") {
        cfg.output_root = testutil::temp_dir("curate_empty");
        std::istringstream in("");
        const auto summary = curate(in, cfg);
        REQUIRE(summary.videos == 0);
        REQUIRE(summary.instances == 0);
        REQUIRE(summary.tracklets == 0);
        REQUIRE(summary.discarded == 0);
    }
    SECTION("zero-area boxes are emitted but warned") {
        cfg.output_root = testutil::temp_dir("curate_warn");
        cfg.min_length = 1;
        std::istringstream in(
            "{\"video_id\":\"v\",\"frame_id\":1,\"instance_id\":\"a\","
            "\"polygon\":[[0,0],[1,0],[2,0]]}\n");
        const auto summary = curate(in, cfg);
        REQUIRE(summary.tracklets == 1);
        REQUIRE(summary.warnings.size() == 1);
        REQUIRE(testutil::read_file(cfg.output_root / "v-a-0/groundtruth.txt") == "0,0,2,0\n");
    }
    SECTION("identical input bytes give identical output bytes") {
        std::ostringstream input;
        for (int f : {1, 2, 3, 4, 5, 9, 10, 11, 12, 13})
            input << rect_record("vid", f, "a", 0.5 * f, 1.5, 12, 8) << "\n";
        input << rect_record("other", 2, "x", 3, 4, 5, 6) << "\n";
        for (int f : {3, 4, 5, 6, 7}) input << rect_record("other", f, "x", 3, 4, 5, 6) << "\n";

        CurationConfig cfg_a, cfg_b;
        cfg_a.output_root = testutil::temp_dir("curate_det_a");
        cfg_b.output_root = testutil::temp_dir("curate_det_b");
        std::istringstream in_a(input.str()), in_b(input.str());
        const auto sum_a = curate(in_a, cfg_a);
        const auto sum_b = curate(in_b, cfg_b);
        REQUIRE(sum_a.emitted == sum_b.emitted);
        for (const std::string& name : sum_a.emitted) {
            REQUIRE(testutil::read_file(cfg_a.output_root / name / "groundtruth.txt") ==
                    testutil::read_file(cfg_b.output_root / name / "groundtruth.txt"));
            REQUIRE(testutil::read_file(cfg_a.output_root / name / "frames.map") ==
                    testutil::read_file(cfg_b.output_root / name / "frames.map"));
        }
    }
    SECTION("emitted boxes equal the enclosing box of their polygons") {
        cfg.output_root = testutil::temp_dir("curate_requant");
        cfg.min_length = 1;
        std::istringstream in(rect_record("v", 1, "a", 1.5, 2.5, 3.5, 4.5));
        curate(in, cfg);
        const BBox expect = polygon_to_bbox({{1.5, 2.5}, {5, 2.5}, {5, 7}, {1.5, 7}});
        REQUIRE(testutil::read_file(cfg.output_root / "v-a-0/groundtruth.txt") ==
                groundtruth_line(expect) + "\n");
    }
}
