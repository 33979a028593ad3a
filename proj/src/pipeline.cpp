#include "nucsel/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hash.hpp"
#include "nucsel/clustering.hpp"

namespace fs = std::filesystem;

namespace nucsel {
namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? base / path : path;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

RunConfig parse_run_config(const nlohmann::json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw StageError("config", "config must be a JSON object");
    RunConfig cfg;
    cfg.source = doc;
    try {
        cfg.s = doc.value("s", cfg.s);
        cfg.t = doc.value("t", cfg.t);
        cfg.K1 = doc.value("k1", cfg.K1);
        cfg.K2 = doc.value("k2", cfg.K2);
        cfg.seed = doc.value("seed", cfg.seed);
        // Cheap invariants first, before any path is inspected.
        if (cfg.s <= 0 || cfg.s % 2 != 0) {
            throw StageError("config", "s must be a positive even number, got " + std::to_string(cfg.s));
        }
        if (cfg.t < 1) throw StageError("config", "t must be >= 1");
        if (cfg.K1 < 1) throw StageError("config", "k1 must be >= 1");
        if (cfg.K2 < 1) throw StageError("config", "k2 must be >= 1");

        if (!doc.contains("corpus")) throw StageError("config", "missing 'corpus' manifest path");
        cfg.corpus = resolve(base_dir, doc.at("corpus").get<std::string>());
        cfg.output_dir = resolve(base_dir, doc.value("output_dir", std::string("run")));

        if (doc.contains("features")) {
            const auto& f = doc.at("features");
            if (f.contains("import")) cfg.import_features = resolve(base_dir, f.at("import").get<std::string>());
            cfg.l2_normalize = f.value("l2_normalize", false);
        }
        if (doc.contains("kmeans")) {
            cfg.kmeans.max_iter = doc.at("kmeans").value("max_iter", cfg.kmeans.max_iter);
            cfg.kmeans.restarts = doc.at("kmeans").value("restarts", cfg.kmeans.restarts);
        }
        cfg.ablation = parse_ablation(doc.value("ablation", std::string("full")));

        if (doc.contains("synth")) {
            const auto& sy = doc.at("synth");
            if (sy.contains("bank_mask")) cfg.bank_mask = resolve(base_dir, sy.at("bank_mask").get<std::string>());
            cfg.synth_count = sy.value("count", cfg.synth_count);
            cfg.synth.height = sy.value("height", cfg.synth.height);
            cfg.synth.width = sy.value("width", cfg.synth.width);
            cfg.synth.canvas_height = sy.value("canvas_height", cfg.synth.canvas_height);
            cfg.synth.canvas_width = sy.value("canvas_width", cfg.synth.canvas_width);
            cfg.synth.retry_budget = sy.value("retry_budget", cfg.synth.retry_budget);
            if (sy.contains("q") && !sy.at("q").is_null()) cfg.synth.Q = sy.at("q").get<int>();
            cfg.transforms.random_crops = sy.value("random_crops", cfg.transforms.random_crops);
        }
        if (doc.contains("eval")) {
            const auto& ev = doc.at("eval");
            if (ev.contains("gt_dir")) cfg.gt_dir = resolve(base_dir, ev.at("gt_dir").get<std::string>());
            if (ev.contains("pred_dir")) cfg.pred_dir = resolve(base_dir, ev.at("pred_dir").get<std::string>());
            cfg.match = parse_match_criterion(ev.value("match", std::string("jaccard")));
        }
    } catch (const StageError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw StageError("config", e.what());
    } catch (const Error& e) {
        throw StageError("config", e.what());
    }
    cfg.synth.seed = derive_seed(cfg.seed, "synth");
    cfg.transforms.seed = derive_seed(cfg.seed, "bank");
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = read_json(path);
    } catch (const Error& e) {
        throw StageError("config", e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

void validate(const RunConfig& cfg) {
    auto fail = [](const std::string& m) { throw StageError("config", m); };
    if (cfg.s <= 0 || cfg.s % 2 != 0) fail("s must be a positive even number, got " + std::to_string(cfg.s));
    if (cfg.t < 1) fail("t must be >= 1");
    if (cfg.K1 < 1) fail("k1 must be >= 1");
    if (cfg.K2 < 1) fail("k2 must be >= 1");
    if (cfg.kmeans.max_iter < 1 || cfg.kmeans.restarts < 1) fail("kmeans max_iter and restarts must be >= 1");
    if (cfg.synth_count < 0) fail("synth count must be >= 0");
    try {
        validate(cfg.synth);
    } catch (const Error& e) {
        fail(e.what());
    }
    if (cfg.gt_dir.has_value() != cfg.pred_dir.has_value()) fail("eval needs both gt_dir and pred_dir");

    if (!fs::exists(cfg.corpus)) fail("corpus manifest not found: " + cfg.corpus.string());
    if (cfg.import_features && !fs::exists(*cfg.import_features)) {
        fail("feature file not found: " + cfg.import_features->string());
    }
    if (cfg.bank_mask && !fs::exists(*cfg.bank_mask)) fail("bank mask not found: " + cfg.bank_mask->string());
    if (cfg.gt_dir && !fs::is_directory(*cfg.gt_dir)) fail("gt_dir not found: " + cfg.gt_dir->string());
    if (cfg.pred_dir && !fs::is_directory(*cfg.pred_dir)) fail("pred_dir not found: " + cfg.pred_dir->string());
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

nlohmann::json patches_to_json(const CropResult& crop, int s, int t) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : crop.patches) list.push_back({{"image_id", p.image_id}, {"x", p.x}, {"y", p.y}, {"s", p.s}});
    return {{"s", s}, {"t", t}, {"count", crop.patches.size()}, {"patches", list}, {"warnings", crop.warnings}};
}

std::vector<PatchRef> patches_from_json(const nlohmann::json& doc) {
    try {
        std::vector<PatchRef> out;
        for (const auto& p : doc.at("patches")) {
            out.push_back(PatchRef{p.at("image_id").get<std::string>(), p.at("x").get<int>(), p.at("y").get<int>(),
                                   p.at("s").get<int>()});
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed patch list: ") + e.what());
    }
}

std::vector<ImageMetrics> evaluate_dirs(const fs::path& gt_dir, const fs::path& pred_dir, MatchCriterion criterion) {
    std::vector<fs::path> gt_files;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") gt_files.push_back(e.path());
    }
    std::sort(gt_files.begin(), gt_files.end());
    if (gt_files.empty()) throw Error("no ground-truth masks in " + gt_dir.string());

    std::vector<ImageMetrics> rows(gt_files.size());
    parallel_for(gt_files.size(), [&](std::size_t i) {
        const fs::path pred_path = pred_dir / gt_files[i].filename();
        if (!fs::exists(pred_path)) throw Error("missing prediction " + pred_path.string());
        const InstanceMask gt = load_mask(gt_files[i]).mask;
        const InstanceMask pred = load_mask(pred_path).mask;
        rows[i] = ImageMetrics{gt_files[i].stem().string(), aji(gt, pred, criterion), dice(gt, pred)};
    });
    return rows;
}

void write_metrics_csv(const std::vector<ImageMetrics>& rows, const fs::path& path) {
    std::ostringstream out;
    out << std::setprecision(17) << "image,aji,dice\n";
    double aji_sum = 0, dice_sum = 0;
    for (const auto& r : rows) {
        out << r.name << ',' << r.aji << ',' << r.dice << '\n';
        aji_sum += r.aji;
        dice_sum += r.dice;
    }
    if (!rows.empty()) {
        const auto n = static_cast<double>(rows.size());
        out << "mean," << aji_sum / n << ',' << dice_sum / n << '\n';
    }
    write_text(path, out.str());
}

std::map<std::string, double> read_metric_column(const fs::path& path, const std::string& column) {
    std::istringstream in(read_text(path));
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV " + path.string());
    const auto header = split(line);
    const auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) throw Error("column '" + column + "' not found in " + path.string());
    const auto col = static_cast<std::size_t>(it - header.begin());

    std::map<std::string, double> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() <= col) throw Error("short row in " + path.string() + ": " + line);
        if (cells[0] == "mean") continue;
        try {
            out[cells[0]] = std::stod(cells[col]);
        } catch (const std::exception&) {
            throw Error("non-numeric value in " + path.string() + ": " + cells[col]);
        }
    }
    return out;
}

nlohmann::json write_synthetic_masks(const std::vector<SynthResult>& masks, const SynthMaskConfig& cfg,
                                     const std::string& source, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < masks.size(); ++i) {
        std::ostringstream name;
        name << "mask_" << std::setw(3) << std::setfill('0') << i << ".png";
        const SynthResult& r = masks[i];
        const std::size_t count = r.mask.instance_count();
        save_mask(r.mask, dir / name.str(), MaskSidecar{source, r.crop_x, r.crop_y, count});
        entries.push_back({{"file", name.str()},
                           {"seed", derive_seed(cfg.seed, static_cast<std::uint64_t>(i))},
                           {"requested", r.requested},
                           {"placed", r.placed},
                           {"instance_count", count},
                           {"crop", {r.crop_x, r.crop_y}},
                           {"warnings", r.warnings}});
    }
    nlohmann::json manifest = {{"source", source},
                               {"seed", cfg.seed},
                               {"height", cfg.height},
                               {"width", cfg.width},
                               {"canvas_height", cfg.canvas_height},
                               {"canvas_width", cfg.canvas_width},
                               {"masks", entries}};
    write_json(dir / "manifest.json", manifest);
    return manifest;
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

namespace {

class StageRunner {
public:
    StageRunner(fs::path out_dir, nlohmann::json previous, nlohmann::json& manifest, RunSummary& summary)
        : out_dir_(std::move(out_dir)), previous_(std::move(previous)), manifest_(manifest), summary_(summary) {}

    // `body` writes its outputs and returns them relative to the output dir.
    void operator()(const std::string& name, const nlohmann::json& inputs,
                    const std::function<std::vector<std::string>()>& body) {
        const std::string input_hash = detail::sha256_hex(inputs.dump());
        if (const nlohmann::json* prev = find_previous(name); prev && reusable(*prev, input_hash)) {
            manifest_["stages"].push_back(*prev);
            summary_.skipped.push_back(name);
            write_json(out_dir_ / "manifest.json", manifest_);
            return;
        }
        nlohmann::json entry = {{"name", name}, {"input_hash", input_hash}};
        try {
            const std::vector<std::string> outputs = body();
            nlohmann::json hashes = nlohmann::json::object();
            for (const auto& rel : outputs) hashes[rel] = detail::sha256_file(out_dir_ / rel);
            entry["status"] = "ok";
            entry["outputs"] = hashes;
        } catch (const std::exception& e) {
            entry["status"] = "error";
            entry["error"] = e.what();
            manifest_["stages"].push_back(entry);
            manifest_["status"] = "failed";
            write_json(out_dir_ / "manifest.json", manifest_);
            throw StageError(name, e.what());
        }
        manifest_["stages"].push_back(entry);
        summary_.executed.push_back(name);
        write_json(out_dir_ / "manifest.json", manifest_);
    }

    std::string output_hash(const std::string& stage, const std::string& rel) const {
        for (const auto& s : manifest_["stages"]) {
            if (s.at("name") == stage) return s.at("outputs").at(rel).get<std::string>();
        }
        throw Error("stage " + stage + " has not produced " + rel);
    }

private:
    const nlohmann::json* find_previous(const std::string& name) const {
        if (!previous_.is_object() || !previous_.contains("stages")) return nullptr;
        for (const auto& s : previous_.at("stages")) {
            if (s.value("name", "") == name) return &s;
        }
        return nullptr;
    }

    bool reusable(const nlohmann::json& prev, const std::string& input_hash) const {
        if (prev.value("status", "") != "ok" || prev.value("input_hash", "") != input_hash) return false;
        for (const auto& [rel, hash] : prev.at("outputs").items()) {
            const fs::path p = out_dir_ / rel;
            if (!fs::exists(p) || detail::sha256_file(p) != hash.get<std::string>()) return false;
        }
        return true;
    }

    fs::path out_dir_;
    nlohmann::json previous_;
    nlohmann::json& manifest_;
    RunSummary& summary_;
};

nlohmann::json corpus_fingerprint(const fs::path& manifest) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& e : read_corpus_manifest(manifest)) {
        files.push_back({{"id", e.id}, {"sha256", detail::sha256_file(e.path)}});
    }
    return files;
}

nlohmann::json directory_fingerprint(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : files) out.push_back({{"file", f.filename().string()}, {"sha256", detail::sha256_file(f)}});
    return out;
}

}  // namespace

RunSummary run(const RunConfig& cfg) {
    validate(cfg);
    fs::create_directories(cfg.output_dir);
    const fs::path out = cfg.output_dir;

    nlohmann::json previous;
    if (fs::exists(out / "manifest.json")) {
        try {
            previous = read_json(out / "manifest.json");
        } catch (const Error&) {
            previous = nullptr;  // unreadable manifest: recompute everything
        }
    }

    const std::uint64_t cluster_seed = derive_seed(cfg.seed, "cluster");
    nlohmann::json manifest = {{"tool", "nucsel"},
                               {"version", kVersion},
                               {"config", cfg.source},
                               {"seeds",
                                {{"root", cfg.seed},
                                 {"cluster", cluster_seed},
                                 {"synth", cfg.synth.seed},
                                 {"bank", cfg.transforms.seed}}},
                               {"stages", nlohmann::json::array()},
                               {"status", "running"}};

    RunSummary summary;
    summary.manifest = out / "manifest.json";
    StageRunner stage(out, previous, manifest, summary);

    std::optional<std::vector<ImageRecord>> images;
    auto corpus = [&]() -> const std::vector<ImageRecord>& {
        if (!images) images = load_corpus(cfg.corpus);
        return *images;
    };

    nlohmann::json corpus_hash;
    try {
        corpus_hash = corpus_fingerprint(cfg.corpus);
    } catch (const Error& e) {
        throw StageError("crop", e.what());
    }

    stage("crop", {{"s", cfg.s}, {"t", cfg.t}, {"corpus", corpus_hash}}, [&] {
        const CropResult crop = crop1(corpus(), cfg.s, cfg.t);
        for (const auto& w : crop.warnings) std::cerr << "[crop] warning: " << w << "\n";
        write_json(out / "patches.json", patches_to_json(crop, cfg.s, cfg.t));
        return std::vector<std::string>{"patches.json"};
    });

    const nlohmann::json patch_doc = read_json(out / "patches.json");
    for (const auto& w : patch_doc.value("warnings", std::vector<std::string>{})) summary.warnings.push_back(w);

    nlohmann::json feature_inputs = {{"patches", stage.output_hash("crop", "patches.json")},
                                     {"l2_normalize", cfg.l2_normalize}};
    if (cfg.import_features) {
        feature_inputs["import"] = detail::sha256_file(*cfg.import_features);
    } else {
        feature_inputs["corpus"] = corpus_hash;
        feature_inputs["extractor"] = "builtin-v1";
    }
    stage("features", feature_inputs, [&] {
        const std::vector<PatchRef> patches = patches_from_json(patch_doc);
        FeatureStore store = cfg.import_features ? import_features(*cfg.import_features)
                                                 : build_builtin_store(corpus(), patches);
        require_keys(store, patches);
        if (cfg.l2_normalize) store.l2_normalize();
        export_features(store, out / "features.fpb");
        return std::vector<std::string>{"features.fpb"};
    });

    std::optional<FeatureStore> store_cache;
    auto store = [&]() -> const FeatureStore& {
        if (!store_cache) store_cache = import_features(out / "features.fpb");
        return *store_cache;
    };

    stage("cluster",
          {{"features", stage.output_hash("features", "features.fpb")},
           {"patches", stage.output_hash("crop", "patches.json")},
           {"k1", cfg.K1},
           {"k2", cfg.K2},
           {"seed", cluster_seed},
           {"max_iter", cfg.kmeans.max_iter},
           {"restarts", cfg.kmeans.restarts}},
          [&] {
              const std::vector<PatchRef> patches = patches_from_json(patch_doc);
              const DualClustering dual = dual_level_clustering(patches, store(), cfg.K1, cfg.K2, cluster_seed, cfg.kmeans);
              write_json(out / "clusters.json", cluster_dump(dual));
              return std::vector<std::string>{"clusters.json"};
          });

    stage("select",
          {{"clusters", stage.output_hash("cluster", "clusters.json")},
           {"features", stage.output_hash("features", "features.fpb")},
           {"ablation", to_string(cfg.ablation)}},
          [&] {
              const DualClustering dual = dual_from_json(read_json(out / "clusters.json"));
              const SelectionReport rep = cps_select(dual, store(), cfg.ablation);
              write_json(out / "selection.json", to_json(rep));
              write_text(out / "terms.csv", terms_csv(rep));
              return std::vector<std::string>{"selection.json", "terms.csv"};
          });
    summary.selected = selection_from_json(read_json(out / "selection.json")).chosen();

    if (cfg.bank_mask) {
        const fs::path side = sidecar_path(*cfg.bank_mask);
        stage("synth-masks",
              {{"bank", detail::sha256_file(*cfg.bank_mask)},
               {"count", cfg.synth_count},
               {"seed", cfg.synth.seed},
               {"bank_seed", cfg.transforms.seed},
               {"random_crops", cfg.transforms.random_crops},
               {"q", cfg.synth.Q ? nlohmann::json(*cfg.synth.Q) : nlohmann::json(nullptr)},
               {"size", {cfg.synth.height, cfg.synth.width}},
               {"canvas", {cfg.synth.canvas_height, cfg.synth.canvas_width}},
               {"retry_budget", cfg.synth.retry_budget}},
              [&] {
                  const InstanceMask source = load_mask(*cfg.bank_mask).mask;
                  const NucleusBank bank = build_nucleus_bank(source, cfg.transforms);
                  const auto masks = synthesize_batch(bank, cfg.synth, cfg.synth_count);
                  if (fs::exists(out / "masks")) fs::remove_all(out / "masks");
                  const auto doc = write_synthetic_masks(masks, cfg.synth, cfg.bank_mask->filename().string(), out / "masks");
                  std::vector<std::string> files{"masks/manifest.json"};
                  for (const auto& m : doc.at("masks")) {
                      const std::string f = m.at("file").get<std::string>();
                      files.push_back("masks/" + f);
                      files.push_back("masks/" + fs::path(f).replace_extension(".json").string());
                  }
                  return files;
              });
    }

    if (cfg.gt_dir && cfg.pred_dir) {
        stage("eval",
              {{"gt", directory_fingerprint(*cfg.gt_dir)},
               {"pred", directory_fingerprint(*cfg.pred_dir)},
               {"match", cfg.match == MatchCriterion::Jaccard ? "jaccard" : "intersection"}},
              [&] {
                  write_metrics_csv(evaluate_dirs(*cfg.gt_dir, *cfg.pred_dir, cfg.match), out / "metrics.csv");
                  return std::vector<std::string>{"metrics.csv"};
              });
    }

    manifest["status"] = "complete";
    write_json(out / "manifest.json", manifest);
    return summary;
}

}  // namespace nucsel
