#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "symkit/simulator.hpp"
#include "testutil.hpp"

using namespace symkit::sim;
using symkit::AieConfig;
using symkit::BBox;
using Catch::Matchers::WithinAbs;

namespace {

double mean_center_error(const SimResult& result, const std::vector<SimFrame>& frames) {
    double e = 0.0;
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const auto pc = symkit::box_center(result.tracklet[i].second);
        const auto gc = symkit::box_center(frames[i].gt);
        e += std::hypot(pc.first - gc.first, pc.second - gc.second);
    }
    return e / static_cast<double>(frames.size() - 1);
}

SequenceSpec ramp_spec(std::uint64_t seed) {
    SequenceSpec spec;
    spec.motion = MotionKind::ScaleRamp;
    spec.scale_ramp = 1.03;
    spec.length = 60;
    spec.noise_std = 1.0;
    spec.seed = seed;
    spec.smoke_features = false;
    return spec;
}

}  // namespace

TEST_CASE("gen_sequence", "[simulator]") {
    SECTION("constant velocity follows the motion law exactly without noise") {
        SequenceSpec spec;
        spec.motion = MotionKind::ConstantVelocity;
        spec.start_cx = 10;
        spec.start_cy = 10;
        spec.vx = 2;
        spec.vy = 0;
        spec.noise_std = 0;
        spec.length = 5;
        const auto frames = gen_sequence(spec);
        REQUIRE(frames.size() == 5);
        REQUIRE(symkit::box_center(frames[2].gt) == std::pair{14.0, 10.0});
        REQUIRE(symkit::box_center(frames[0].gt) == std::pair{10.0, 10.0});
    }
    SECTION("scale ramp multiplies the sides each frame") {
        SequenceSpec spec;
        spec.motion = MotionKind::ScaleRamp;
        spec.scale_ramp = 1.1;
        spec.width = 10;
        spec.height = 20;
        spec.noise_std = 0;
        spec.length = 3;
        const auto frames = gen_sequence(spec);
        REQUIRE_THAT(frames[2].gt.w, WithinAbs(10 * 1.21, 1e-12));
        REQUIRE_THAT(frames[2].gt.h, WithinAbs(20 * 1.21, 1e-12));
    }
    SECTION("piecewise motion switches velocity between segments") {
        SequenceSpec spec;
        spec.motion = MotionKind::Piecewise;
        spec.segments = {{2, 1, 0}, {2, 0, 3}};
        spec.start_cx = 0;
        spec.start_cy = 0;
        spec.noise_std = 0;
        spec.length = 5;
        const auto frames = gen_sequence(spec);
        REQUIRE(symkit::box_center(frames[2].gt) == std::pair{2.0, 0.0});
        REQUIRE(symkit::box_center(frames[4].gt) == std::pair{2.0, 6.0});
    }
    SECTION("distractors follow the fixed offset law") {
        SequenceSpec spec;
        spec.distractor_count = 2;
        spec.distractor_dx = 30;
        spec.distractor_dy = -5;
        spec.noise_std = 0;
        spec.length = 2;
        const auto frames = gen_sequence(spec);
        const auto [gcx, gcy] = symkit::box_center(frames[1].gt);
        REQUIRE(symkit::box_center(frames[1].distractors[0]) == std::pair{gcx + 30, gcy - 5});
        REQUIRE(symkit::box_center(frames[1].distractors[1]) == std::pair{gcx + 60, gcy - 10});
    }
    SECTION("fixed seed reproduces the sequence exactly") {
        SequenceSpec spec;
        spec.noise_std = 2.5;
        spec.seed = 99;
        spec.length = 20;
        const auto a = gen_sequence(spec);
        const auto b = gen_sequence(spec);
        for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].gt == b[i].gt);
        spec.seed = 100;
        const auto c = gen_sequence(spec);
        bool any_diff = false;
        for (std::size_t i = 0; i < a.size(); ++i) any_diff |= !(a[i].gt == c[i].gt);
        REQUIRE(any_diff);
    }
    SECTION("invalid specs rejected") {
        SequenceSpec spec;
        spec.length = 1;
        REQUIRE_THROWS_AS(gen_sequence(spec), symkit::SchemaError);
        spec.length = 10;
        spec.motion = MotionKind::Piecewise;
        REQUIRE_THROWS_AS(gen_sequence(spec), symkit::SchemaError);
    }
}

TEST_CASE("oracle score map", "[simulator]") {
    SequenceSpec spec;
    spec.noise_std = 0;
    spec.length = 2;
    const auto frames = gen_sequence(spec);
    const SyntheticOracle oracle{spec};
    const BBox search = symkit::search_region(symkit::box_center(frames[1].gt), {16, 16}, 1.0,
                                              AieConfig{});

    SECTION("target bump peaks at 1 under a perfect size hypothesis") {
        const auto map = oracle.score_map(search, frames[1], {16, 16}, 1.0);
        double mx = 0;
        for (double v : map.scores.data()) mx = std::max(mx, v);
        REQUIRE(mx > 0.97);
        REQUIRE(mx <= 1.0);
        REQUIRE(map.scores.all_finite());
    }
    SECTION("a wrong size hypothesis attenuates the response") {
        const auto map = oracle.score_map(search, frames[1], {32, 32}, 1.0);
        double mx = 0;
        for (double v : map.scores.data()) mx = std::max(mx, v);
        REQUIRE(mx < 0.1);  // log-scale penalty at ratio 2 with sigma 0.1
    }
}

TEST_CASE("easy sequences track tightly in both modes", "[simulator]") {
    SequenceSpec easy;
    easy.motion = MotionKind::ConstantVelocity;
    easy.vx = 0.5;
    easy.vy = 0.25;
    easy.noise_std = 0;
    easy.length = 200;
    easy.smoke_features = false;
    const AieConfig cfg;
    REQUIRE(simulate_track(easy, cfg, true).mean_iou >= 0.99);
    REQUIRE(simulate_track(easy, cfg, false).mean_iou >= 0.99);
}

TEST_CASE("fused trajectory converges on zero-noise constant velocity", "[simulator]") {
    SequenceSpec easy;
    easy.motion = MotionKind::ConstantVelocity;
    easy.vx = 0.5;
    easy.vy = 0.25;
    easy.noise_std = 0;
    easy.length = 30;
    easy.smoke_features = false;
    const auto result = simulate_track(easy, AieConfig{}, true);
    const auto frames = gen_sequence(easy);
    for (std::size_t i = 10; i < frames.size(); ++i) {
        const auto pc = symkit::box_center(result.tracklet[i].second);
        const auto gc = symkit::box_center(frames[i].gt);
        REQUIRE(std::hypot(pc.first - gc.first, pc.second - gc.second) < 0.2);
    }
}

TEST_CASE("scale ramp: engine keeps search coverage ahead of the baseline", "[simulator]") {
    const AieConfig cfg;
    for (std::uint64_t seed : {1, 2, 3}) {
        const SequenceSpec spec = ramp_spec(seed);
        const auto with = simulate_track(spec, cfg, true);
        const auto without = simulate_track(spec, cfg, false);
        REQUIRE(with.mean_src > without.mean_src);
        REQUIRE(with.rescues > 0);
    }
}

TEST_CASE("distractor ensemble: fusion keeps the center error bounded", "[simulator]") {
    const AieConfig cfg;
    int engine_better = 0;
    double err_with_sum = 0.0, err_without_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SequenceSpec spec;
        spec.motion = MotionKind::ConstantVelocity;
        spec.length = 60;
        spec.noise_std = 0.0;
        spec.response_noise = 0.3;
        spec.bump_sigma_factor = 0.15;
        spec.distractor_count = 1;
        spec.distractor_dx = 10.0;
        spec.distractor_dy = 0.0;
        spec.distractor_amplitude = 0.9;
        spec.seed = seed;
        spec.smoke_features = false;
        const auto frames = gen_sequence(spec);
        const double err_with = mean_center_error(simulate_track(spec, cfg, true), frames);
        const double err_without = mean_center_error(simulate_track(spec, cfg, false), frames);
        engine_better += err_with < err_without;
        err_with_sum += err_with;
        err_without_sum += err_without;
    }
    REQUIRE(engine_better >= 9);
    REQUIRE(err_with_sum < err_without_sum);
}

TEST_CASE("diagnostics CSV is deterministic for a fixed seed", "[simulator]") {
    SequenceSpec spec = ramp_spec(7);
    spec.smoke_features = true;
    const AieConfig cfg;
    std::ostringstream a, b;
    write_diagnostics_csv(a, simulate_track(spec, cfg, true));
    write_diagnostics_csv(b, simulate_track(spec, cfg, true));
    REQUIRE(a.str() == b.str());
    REQUIRE(a.str().rfind("frame,confidence,rescue_fired,scale,src,feature_energy\n", 0) == 0);
}

TEST_CASE("engine-off configuration equals bypassing the engine", "[simulator]") {
    SequenceSpec spec = ramp_spec(3);
    spec.smoke_features = true;
    AieConfig off;
    off.scale_factors.clear();
    off.alpha_kalman = 1.0;
    const SimResult via_engine = simulate_track(spec, off, true);
    const SimResult bypass = simulate_track(spec, off, false);
    REQUIRE(via_engine.tracklet == bypass.tracklet);
    std::ostringstream a, b;
    write_diagnostics_csv(a, via_engine);
    write_diagnostics_csv(b, bypass);
    REQUIRE(a.str() == b.str());
}

TEST_CASE("feature chain smoke path", "[simulator]") {
    SequenceSpec spec;
    spec.length = 4;
    spec.noise_std = 0;
    spec.smoke_features = true;
    const auto on = simulate_track(spec, AieConfig{}, true);
    for (const auto& row : on.diagnostics) REQUIRE(row.feature_energy > 0.0);
    const auto again = simulate_track(spec, AieConfig{}, true);
    for (std::size_t i = 0; i < on.diagnostics.size(); ++i)
        REQUIRE(on.diagnostics[i].feature_energy == again.diagnostics[i].feature_energy);
    spec.smoke_features = false;
    const auto off = simulate_track(spec, AieConfig{}, true);
    for (const auto& row : off.diagnostics) REQUIRE(row.feature_energy == 0.0);
}

TEST_CASE("sweep_aie", "[simulator]") {
    SECTION("single-cell grid reproduces a single run") {
        SweepGrid grid;
        grid.taus = {0.98};
        grid.scale_sets = {{0.95, 1.05}};
        grid.alphas = {0.5};
        grid.seeds = {5};
        SequenceSpec spec = ramp_spec(0);
        const auto rows = sweep_aie(spec, AieConfig{}, grid);
        REQUIRE(rows.size() == 1);
        SequenceSpec single = spec;
        single.seed = 5;
        const auto direct = simulate_track(single, AieConfig{}, true);
        REQUIRE_THAT(rows[0].mean_iou, WithinAbs(direct.mean_iou, 1e-15));
        REQUIRE_THAT(rows[0].mean_src, WithinAbs(direct.mean_src, 1e-15));
    }
    SECTION("alpha 0 and alpha 1 differ under trajectory noise") {
        SweepGrid grid;
        grid.taus = {0.98};
        grid.scale_sets = {{0.95, 1.05}};
        grid.alphas = {0.0, 1.0};
        grid.seeds = {2};
        const auto rows = sweep_aie(ramp_spec(0), AieConfig{}, grid);
        REQUIRE(rows.size() == 2);
        REQUIRE(rows[0].mean_iou != rows[1].mean_iou);
    }
    SECTION("default grid emits 27 deterministic rows") {
        SequenceSpec spec = ramp_spec(0);
        spec.length = 30;  // keep the unit suite fast
        const SweepGrid grid;
        const auto rows = sweep_aie(spec, AieConfig{}, grid);
        REQUIRE(rows.size() == 27);
        std::ostringstream a, b;
        write_sweep_csv(a, rows);
        write_sweep_csv(b, sweep_aie(spec, AieConfig{}, grid));
        REQUIRE(a.str() == b.str());
        REQUIRE(a.str().rfind("tau_uncert,scale_factors,alpha_kalman,mean_iou,mean_src\n", 0) ==
                0);
        REQUIRE(a.str().find("0.97,0.9;1.1,0.4,") != std::string::npos);
    }
}
