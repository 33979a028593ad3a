// nucsel: patch selection, mask synthesis and segmentation evaluation.
//
// Subcommands: crop, features, select, baseline, synth-masks, eval, ttest,
// report, run. Worker count comes from NUCSEL_WORKERS. Errors go to stderr
// tagged with the stage name and exit nonzero.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "nucsel/clustering.hpp"
#include "nucsel/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nucsel;

namespace {

void write_json(const fs::path& path, const nlohmann::json& doc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << "\n";
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

nlohmann::json patch_list(const std::vector<PatchRef>& patches) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : patches) list.push_back({{"image_id", p.image_id}, {"x", p.x}, {"y", p.y}, {"s", p.s}});
    return list;
}

// Runs a subcommand body, tagging any failure with the stage name.
int guarded(const std::string& stage, const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const StageError& e) {
        std::cerr << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "[" << stage << "] " << e.what() << "\n";
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nucsel: consistency-based patch selection and nuclei mask tooling"};
    app.require_subcommand(1);
    int status = 0;

    // crop
    auto* crop = app.add_subcommand("crop", "Enumerate sliding-window patches over a corpus");
    fs::path crop_manifest, crop_out = "patches.json";
    int crop_s = 256, crop_t = 15;
    crop->add_option("--manifest", crop_manifest, "Corpus manifest (JSON list of {id, path})")->required();
    crop->add_option("--s", crop_s, "Patch side")->capture_default_str();
    crop->add_option("--t", crop_t, "Window step")->capture_default_str();
    crop->add_option("--out", crop_out, "Output patch list")->capture_default_str();
    crop->callback([&] {
        status = guarded("crop", [&] {
            const auto images = load_corpus(crop_manifest);
            const CropResult r = crop1(images, crop_s, crop_t);
            for (const auto& w : r.warnings) std::cerr << "[crop] warning: " << w << "\n";
            write_json(crop_out, patches_to_json(r, crop_s, crop_t));
            std::cout << r.patches.size() << " patches\n";
        });
    });

    // features
    auto* feat = app.add_subcommand("features", "Export built-in features for patches and their quadrants");
    fs::path feat_manifest, feat_patches, feat_out = "features.fpb";
    bool feat_l2 = false;
    feat->add_option("--manifest", feat_manifest, "Corpus manifest")->required();
    feat->add_option("--patches", feat_patches, "Patch list from `crop`")->required();
    feat->add_option("--out", feat_out, "Feature file")->capture_default_str();
    feat->add_flag("--l2", feat_l2, "L2-normalize every vector");
    feat->callback([&] {
        status = guarded("features", [&] {
            const auto images = load_corpus(feat_manifest);
            const auto patches = patches_from_json(read_json(feat_patches));
            FeatureStore store = build_builtin_store(images, patches);
            if (feat_l2) store.l2_normalize();
            export_features(store, feat_out);
            std::cout << store.size() << " vectors of dim " << store.dim() << "\n";
        });
    });

    // select
    auto* sel = app.add_subcommand("select", "Dual-level clustering and consistency-based patch selection");
    fs::path sel_patches, sel_features, sel_out = "selection.json", sel_clusters, sel_csv;
    int sel_k1 = 9, sel_k2 = 4, sel_max_iter = 300, sel_restarts = 1;
    std::uint64_t sel_seed = 0;
    std::string sel_ablation = "full";
    sel->add_option("--patches", sel_patches, "Patch list from `crop`")->required();
    sel->add_option("--features", sel_features, "Feature file (built-in export or imported deep features)")->required();
    sel->add_option("--k1", sel_k1, "Coarse clusters (= patches selected)")->capture_default_str();
    sel->add_option("--k2", sel_k2, "Fine clusters per coarse cluster")->capture_default_str();
    sel->add_option("--seed", sel_seed, "Clustering seed")->capture_default_str();
    sel->add_option("--max-iter", sel_max_iter, "Lloyd iterations cap")->capture_default_str();
    sel->add_option("--restarts", sel_restarts, "K-means restarts")->capture_default_str();
    sel->add_option("--ablation", sel_ablation, "full | drop_d2 | drop_d3 | kmeans_only")->capture_default_str();
    sel->add_option("--out", sel_out, "Selection report")->capture_default_str();
    sel->add_option("--clusters-out", sel_clusters, "Optional cluster dump");
    sel->add_option("--csv", sel_csv, "Optional CSV of every patch's terms");
    sel->callback([&] {
        status = guarded("select", [&] {
            const auto patches = patches_from_json(read_json(sel_patches));
            const FeatureStore store = import_features(sel_features);
            require_keys(store, patches);
            const DualClustering dual = dual_level_clustering(patches, store, sel_k1, sel_k2, sel_seed,
                                                              KMeansOptions{sel_max_iter, sel_restarts});
            const SelectionReport rep = cps_select(dual, store, parse_ablation(sel_ablation));
            write_json(sel_out, to_json(rep));
            if (!sel_clusters.empty()) write_json(sel_clusters, cluster_dump(dual));
            if (!sel_csv.empty()) {
                std::ofstream(sel_csv) << terms_csv(rep);
            }
            for (const auto& c : rep.clusters) {
                const auto& r = c.chosen();
                std::cout << "cluster " << c.cluster << ": " << r.patch.image_id << " (" << r.patch.x << ", "
                          << r.patch.y << ") total=" << r.terms.total << "\n";
            }
        });
    });

    // baseline
    auto* base = app.add_subcommand("baseline", "Random selection baselines (rnd-crop, rnd-cen-crop)");
    std::string base_kind = "rnd-crop";
    fs::path base_manifest, base_out = "baseline.json";
    int base_s = 256, base_t = 15, base_k1 = 9;
    std::uint64_t base_seed = 21;
    base->add_option("--kind", base_kind, "rnd-crop | rnd-cen-crop")->capture_default_str();
    base->add_option("--manifest", base_manifest, "Corpus manifest")->required();
    base->add_option("--s", base_s, "Patch side")->capture_default_str();
    base->add_option("--t", base_t, "Window step (rnd-crop pool)")->capture_default_str();
    base->add_option("--k1", base_k1, "Patches to select")->capture_default_str();
    base->add_option("--seed", base_seed, "Seed")->capture_default_str();
    base->add_option("--out", base_out, "Output list")->capture_default_str();
    base->callback([&] {
        status = guarded("baseline", [&] {
            const auto images = load_corpus(base_manifest);
            std::vector<PatchRef> chosen;
            if (base_kind == "rnd-crop") {
                chosen = baseline_rnd_crop(crop1(images, base_s, base_t).patches, base_k1, base_seed);
            } else if (base_kind == "rnd-cen-crop") {
                chosen = baseline_rnd_cen_crop(images, base_k1, base_s, base_seed);
            } else {
                throw Error("unknown baseline kind '" + base_kind + "'");
            }
            write_json(base_out, {{"kind", base_kind}, {"seed", base_seed}, {"patches", patch_list(chosen)}});
            for (const auto& p : chosen) std::cout << p.image_id << " (" << p.x << ", " << p.y << ")\n";
        });
    });

    // synth-masks
    auto* synth = app.add_subcommand("synth-masks", "Synthesize instance masks from one annotated mask");
    fs::path synth_bank, synth_out = "masks";
    int synth_count = 50, synth_size = 256, synth_canvas = 320, synth_q = -1, synth_crops = 4, synth_retries = 100;
    std::uint64_t synth_seed = 0;
    synth->add_option("--bank", synth_bank, "Annotated mask (16-bit PNG)")->required();
    synth->add_option("--count", synth_count, "Masks to generate")->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Seed")->capture_default_str();
    synth->add_option("--size", synth_size, "Final mask side")->capture_default_str();
    synth->add_option("--canvas", synth_canvas, "Working canvas side")->capture_default_str();
    synth->add_option("--q", synth_q, "Placements per mask (default: source density)");
    synth->add_option("--random-crops", synth_crops, "Random-crop augmentations of the source")->capture_default_str();
    synth->add_option("--retries", synth_retries, "Retry budget per placement")->capture_default_str();
    synth->callback([&] {
        status = guarded("synth-masks", [&] {
            const InstanceMask source = load_mask(synth_bank).mask;
            TransformSet tf;
            tf.random_crops = synth_crops;
            tf.seed = derive_seed(synth_seed, "bank");
            const NucleusBank bank = build_nucleus_bank(source, tf);
            SynthMaskConfig cfg;
            cfg.height = cfg.width = synth_size;
            cfg.canvas_height = cfg.canvas_width = synth_canvas;
            cfg.retry_budget = synth_retries;
            cfg.seed = derive_seed(synth_seed, "synth");
            if (synth_q >= 0) cfg.Q = synth_q;
            const auto masks = synthesize_batch(bank, cfg, synth_count);
            write_synthetic_masks(masks, cfg, synth_bank.filename().string(), synth_out);
            for (const auto& m : masks) {
                for (const auto& w : m.warnings) std::cerr << "[synth-masks] warning: " << w << "\n";
            }
            std::cout << masks.size() << " masks from a bank of " << bank.shapes.size() << " nuclei\n";
        });
    });

    // eval
    auto* ev = app.add_subcommand("eval", "Per-image AJI and Dice over two mask directories");
    fs::path ev_gt, ev_pred, ev_out = "results.csv";
    std::string ev_match = "jaccard";
    ev->add_option("--gt", ev_gt, "Ground-truth mask directory")->required();
    ev->add_option("--pred", ev_pred, "Prediction mask directory")->required();
    ev->add_option("--out", ev_out, "CSV output")->capture_default_str();
    ev->add_option("--match", ev_match, "jaccard | intersection")->capture_default_str();
    ev->callback([&] {
        status = guarded("eval", [&] {
            const auto rows = evaluate_dirs(ev_gt, ev_pred, parse_match_criterion(ev_match));
            write_metrics_csv(rows, ev_out);
            double a = 0, d = 0;
            for (const auto& r : rows) a += r.aji, d += r.dice;
            std::cout << std::setprecision(6) << rows.size() << " images, mean AJI " << a / rows.size()
                      << ", mean Dice " << d / rows.size() << "\n";
        });
    });

    // ttest
    auto* tt = app.add_subcommand("ttest", "Paired t-test between two metrics CSVs (paired by image)");
    fs::path tt_a, tt_b;
    std::string tt_column = "aji";
    tt->add_option("a", tt_a, "First CSV")->required();
    tt->add_option("b", tt_b, "Second CSV")->required();
    tt->add_option("--column", tt_column, "Metric column")->capture_default_str();
    tt->callback([&] {
        status = guarded("ttest", [&] {
            const auto ca = read_metric_column(tt_a, tt_column);
            const auto cb = read_metric_column(tt_b, tt_column);
            std::vector<double> va, vb;
            for (const auto& [name, v] : ca) {
                const auto it = cb.find(name);
                if (it == cb.end()) throw Error("image '" + name + "' missing from " + tt_b.string());
                va.push_back(v);
                vb.push_back(it->second);
            }
            if (va.size() != cb.size()) throw Error("the two CSVs cover different images");
            const TTestResult r = paired_ttest(va, vb);
            std::cout << std::setprecision(10) << "n=" << r.n << " mean_diff=" << r.mean_difference << " t=" << r.t
                      << " p=" << r.p << (r.degenerate ? " (degenerate: zero-variance differences)" : "") << "\n";
        });
    });

    // report
    auto* rep = app.add_subcommand("report", "Render CSV tables and SVG charts for a run directory");
    fs::path rep_dir;
    rep->add_option("run_dir", rep_dir, "Run output directory")->required();
    rep->callback([&] {
        status = guarded("report", [&] {
            const ReportSummary s = report(rep_dir);
            for (const auto& f : s.files) std::cout << f.string() << "\n";
            if (!s.has_metrics) std::cout << "no evaluation performed\n";
        });
    });

    // run
    auto* runc = app.add_subcommand("run", "Run the whole pipeline from a JSON config");
    fs::path run_config;
    runc->add_option("config", run_config, "Run config (JSON)")->required();
    runc->callback([&] {
        status = guarded("run", [&] {
            const RunSummary s = run(load_run_config(run_config));
            for (const auto& st : s.skipped) std::cerr << "[" << st << "] unchanged, skipped\n";
            for (const auto& w : s.warnings) std::cerr << "[crop] warning: " << w << "\n";
            std::cout << "selected " << s.selected.size() << " patches\n";
            for (const auto& p : s.selected) std::cout << "  " << p.image_id << " (" << p.x << ", " << p.y << ")\n";
            std::cout << "manifest: " << s.manifest.string() << "\n";
        });
    });

    CLI11_PARSE(app, argc, argv);
    return status;
}
