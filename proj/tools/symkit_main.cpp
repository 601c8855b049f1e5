#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "symkit/symkit.hpp"

namespace fs = std::filesystem;
using namespace symkit;

namespace {

ToolkitConfig load_toolkit_config(const std::string& path) {
    if (path.empty()) return {};
    return ToolkitConfig::load(path);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw SchemaError("seed list is empty");
    return seeds;
}

int run_curate(const std::string& config_path, const std::string& input,
               const std::string& out, int min_length, bool min_length_set,
               const std::string& link_mode, bool force, const std::string& frames_root) {
    ToolkitConfig cfg = load_toolkit_config(config_path);
    cfg.curation.output_root = out;
    cfg.curation.force = force;
    cfg.curation.frames_root = frames_root;
    if (min_length_set) cfg.curation.min_length = min_length;
    if (link_mode == "copy")
        cfg.curation.link_mode = curation::LinkMode::Copy;
    else if (link_mode == "manifest")
        cfg.curation.link_mode = curation::LinkMode::Manifest;
    else
        throw SchemaError("link mode must be manifest or copy, got '" + link_mode + "'");

    const curation::CurationSummary summary = curation::curate_file(input, cfg.curation);
    for (const auto& r : summary.rejects)
        std::cerr << "reject line " << r.line << ": " << r.reason << "\n";
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "videos=" << summary.videos << "\n"
              << "instances=" << summary.instances << "\n"
              << "tracklets=" << summary.tracklets << "\n"
              << "discarded=" << summary.discarded << "\n"
              << "rejected=" << summary.rejects.size() << "\n";
    return 0;
}

int run_convert(const std::string& vts, const std::string& out) {
    const convert::VtsResult result = convert::parse_vts_result_file(vts);
    const auto files = convert::emit_predictions(result, fs::path(out) / result.video_id);
    std::cout << "video=" << result.video_id << "\n"
              << "frames=" << result.frame_count << "\n"
              << "objects=" << result.detections.size() << "\n"
              << "files=" << files.size() << "\n";
    return 0;
}

int run_evaluate(const std::string& config_path, const std::string& pred_root,
                 const std::string& gt_root, const std::string& mode_name,
                 const std::string& report_path) {
    const ToolkitConfig cfg = load_toolkit_config(config_path);
    const metrics::EvalMode mode = metrics::eval_mode_from_name(mode_name);

    const std::vector<convert::GtTracklet> tracklets = convert::load_gt_tree(gt_root);
    if (tracklets.empty()) throw SchemaError("no ground-truth tracklets under " + gt_root);

    // group tracklets per source video, first-appearance order
    std::vector<std::pair<std::string, std::vector<convert::GtTracklet>>> videos;
    for (const convert::GtTracklet& t : tracklets) {
        auto it = std::find_if(videos.begin(), videos.end(),
                               [&](const auto& v) { return v.first == t.video_id; });
        if (it == videos.end()) {
            videos.push_back({t.video_id, {}});
            it = std::prev(videos.end());
        }
        it->second.push_back(t);
    }

    std::vector<convert::EvalPair> pairs;
    for (const auto& [video, group] : videos) {
        std::vector<convert::PredictionFile> preds;
        const fs::path dir = fs::path(pred_root) / video;
        if (fs::exists(dir)) {
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(dir))
                if (entry.is_regular_file() && entry.path().extension() == ".txt")
                    files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            for (const fs::path& f : files) preds.push_back(convert::load_prediction_file(f));
        }
        for (auto& pair : convert::align_to_gt(preds, group)) pairs.push_back(std::move(pair));
    }

    const metrics::EvalReport report = metrics::evaluate(pairs, cfg.metric, mode);
    const fs::path csv(report_path);
    metrics::write_report_csv(csv, report);
    fs::path summary = csv;
    summary.replace_extension("summary.json");
    metrics::write_summary_json(summary, report, mode);
    fs::path curve = csv;
    curve.replace_extension("curve.csv");
    metrics::write_success_curve_csv(curve, report, cfg.metric);

    std::cout << "mode=" << metrics::eval_mode_name(mode) << "\n"
              << "tracklets=" << report.rows.size() << "\n"
              << "auc=" << format_fixed(report.auc) << "\n"
              << "p=" << format_fixed(report.p) << "\n"
              << "p_norm=" << format_fixed(report.p_norm) << "\n"
              << "op75=" << format_fixed(report.op75) << "\n";
    return 0;
}

int run_simulate(const std::string& config_path, std::uint64_t seed, bool seed_set,
                 const std::string& aie_mode, const std::string& csv) {
    ToolkitConfig cfg = load_toolkit_config(config_path);
    if (seed_set) cfg.sequence.seed = seed;
    bool use_aie = true;
    if (aie_mode == "off")
        use_aie = false;
    else if (aie_mode != "on")
        throw SchemaError("--aie must be on or off, got '" + aie_mode + "'");

    const sim::SimResult result = sim::simulate_track(cfg.sequence, cfg.aie, use_aie);
    if (!csv.empty()) sim::write_diagnostics_csv(fs::path(csv), result);
    std::cout << "frames=" << cfg.sequence.length << "\n"
              << "aie=" << (use_aie ? "on" : "off") << "\n"
              << "mean_iou=" << format_fixed(result.mean_iou) << "\n"
              << "mean_src=" << format_fixed(result.mean_src) << "\n"
              << "rescues=" << result.rescues << "\n";
    return 0;
}

int run_sweep(const std::string& config_path, const std::string& seeds, const std::string& csv) {
    const ToolkitConfig cfg = load_toolkit_config(config_path);
    sim::SweepGrid grid;
    if (!seeds.empty()) grid.seeds = parse_seed_list(seeds);
    const auto rows = sim::sweep_aie(cfg.sequence, cfg.aie, grid);
    if (!csv.empty()) sim::write_sweep_csv(fs::path(csv), rows);
    std::cout << "rows=" << rows.size() << "\n";
    double best_iou = -1.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].mean_iou > best_iou) {
            best_iou = rows[i].mean_iou;
            best = i;
        }
    std::cout << "best_tau=" << format_number(rows[best].tau) << "\n"
              << "best_alpha=" << format_number(rows[best].alpha) << "\n"
              << "best_mean_iou=" << format_fixed(rows[best].mean_iou) << "\n";
    return 0;
}

// Re-aggregates a per-tracklet report CSV.
int run_report(const std::string& csv) {
    std::ifstream in(csv);
    if (!in) throw IoError("cannot open report: " + csv);
    std::string line;
    if (!std::getline(in, line) || line != "tracklet,frames,auc,p,p_norm,op75")
        throw SchemaError("unexpected report header in " + csv);
    double auc = 0, p = 0, p_norm = 0, op75 = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw SchemaError("malformed report row: " + line);
        auc += std::stod(cells[2]);
        p += std::stod(cells[3]);
        p_norm += std::stod(cells[4]);
        op75 += std::stod(cells[5]);
        ++rows;
    }
    if (rows == 0) throw SchemaError("report has no rows: " + csv);
    std::cout << "tracklets=" << rows << "\n"
              << "auc=" << format_fixed(auc / rows) << "\n"
              << "p=" << format_fixed(p / rows) << "\n"
              << "p_norm=" << format_fixed(p_norm / rows) << "\n"
              << "op75=" << format_fixed(op75 / rows) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"symkit: scene-text tracking toolkit (curation, conversion, evaluation, simulation)"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "toolkit config file (key = value sections)")
        ->envname("SYMKIT_CONFIG");

    auto* curate = app.add_subcommand("curate", "convert instance annotations into single-object samples");
    std::string curate_input, curate_out, frames_root;
    std::string link_mode = "manifest";
    int min_length = 5;
    bool force = false;
    curate->add_option("--input", curate_input, "annotation-lines file")->required();
    curate->add_option("--out", curate_out, "output sample tree root")->required();
    auto* min_opt = curate->add_option("--min-length", min_length, "minimum tracklet length")
                        ->capture_default_str();
    curate->add_option("--link-mode", link_mode, "manifest | copy")->capture_default_str();
    curate->add_option("--frames-root", frames_root, "source image root for copy mode");
    curate->add_flag("--force", force, "overwrite existing sample directories");

    auto* convert_cmd = app.add_subcommand("convert", "convert consolidated tracker output into per-object prediction files");
    std::string vts_path, convert_out;
    convert_cmd->add_option("--vts", vts_path, "consolidated result file")->required();
    convert_cmd->add_option("--out", convert_out, "prediction tree root")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score predictions against curated ground truth");
    std::string pred_root, gt_root, report_path;
    std::string mode = "strict-id";
    evaluate->add_option("--pred", pred_root, "prediction tree root")->required();
    evaluate->add_option("--gt", gt_root, "curated sample tree root")->required();
    evaluate->add_option("--mode", mode, "strict-id | id-agnostic")->capture_default_str();
    evaluate->add_option("--report", report_path, "per-tracklet CSV output path")->required();

    auto* simulate = app.add_subcommand("simulate", "run the synthetic tracking loop");
    std::uint64_t seed = 1;
    std::string aie_mode = "on", sim_csv;
    auto* seed_opt = simulate->add_option("--seed", seed, "sequence seed")->capture_default_str();
    simulate->add_option("--aie", aie_mode, "on | off")->capture_default_str();
    simulate->add_option("--csv", sim_csv, "diagnostics CSV output path");

    auto* sweep = app.add_subcommand("sweep", "run the engine hyperparameter grid");
    std::string sweep_seeds, sweep_csv;
    sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds (default 1,2,3)");
    sweep->add_option("--csv", sweep_csv, "sweep table output path");

    auto* report = app.add_subcommand("report", "re-aggregate a per-tracklet report CSV");
    std::string report_csv;
    report->add_option("--csv", report_csv, "report CSV from evaluate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(curate))
            return run_curate(config_path, curate_input, curate_out, min_length,
                              min_opt->count() > 0, link_mode, force, frames_root);
        if (app.got_subcommand(convert_cmd)) return run_convert(vts_path, convert_out);
        if (app.got_subcommand(evaluate))
            return run_evaluate(config_path, pred_root, gt_root, mode, report_path);
        if (app.got_subcommand(simulate))
            return run_simulate(config_path, seed, seed_opt->count() > 0, aie_mode, sim_csv);
        if (app.got_subcommand(sweep)) return run_sweep(config_path, sweep_seeds, sweep_csv);
        if (app.got_subcommand(report)) return run_report(report_csv);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
