#include "nucsel/selection.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <iomanip>

namespace nucsel {

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::Full: return "full";
        case Ablation::DropD2: return "drop_d2";
        case Ablation::DropD3: return "drop_d3";
        case Ablation::KMeansOnly: return "kmeans_only";
    }
    return "?";
}

Ablation parse_ablation(const std::string& name) {
    if (name == "full") return Ablation::Full;
    if (name == "drop_d2") return Ablation::DropD2;
    if (name == "drop_d3") return Ablation::DropD3;
    if (name == "kmeans_only") return Ablation::KMeansOnly;
    throw Error("unknown ablation '" + name + "' (expected full, drop_d2, drop_d3, kmeans_only)");
}

double ablated_score(const CriterionTerms& t, Ablation a) {
    switch (a) {
        case Ablation::Full: return t.total;
        case Ablation::DropD2: return t.d1 + t.d3;
        case Ablation::DropD3: return t.d1 + t.d2;
        case Ablation::KMeansOnly: return t.d1;
    }
    return t.total;
}

int largest_fine_cluster(const FineClustering& fine) {
    const auto& sizes = fine.model.sizes;
    return static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
}

CriterionTerms criterion_terms(std::size_t patch_index, const DualClustering& dual, const FeatureStore& store) {
    if (patch_index >= dual.patches.size()) throw Error("criterion_terms: patch index out of range");
    const PatchRef& patch = dual.patches[patch_index];
    const int k = dual.coarse.assignment[patch_index];
    const FineClustering& fine = dual.fine.at(static_cast<std::size_t>(k));
    const Eigen::VectorXd fine_center = fine.model.centers.row(largest_fine_cluster(fine)).transpose();

    const Eigen::VectorXd fx = store.at(feature_key(patch)).cast<double>();
    const auto quads = crop2(patch);
    std::array<Eigen::VectorXd, 4> fq;
    for (std::size_t q = 0; q < 4; ++q) fq[q] = store.at(feature_key(quads[q])).cast<double>();

    CriterionTerms t;
    t.d1 = (fx - dual.coarse.centers.row(k).transpose()).norm();
    for (const auto& v : fq) t.d2 += (v - fine_center).norm();
    t.d2 /= 4.0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) t.d3 = std::max(t.d3, (fq[i] - fq[j]).norm());
    }
    t.total = t.d1 + t.d2 + t.d3;
    return t;
}

CriterionTerms criterion_terms(const PatchRef& patch, const DualClustering& dual, const FeatureStore& store) {
    const auto it = std::find(dual.patches.begin(), dual.patches.end(), patch);
    if (it == dual.patches.end()) throw Error("patch " + feature_key(patch) + " is not part of the clustering");
    return criterion_terms(static_cast<std::size_t>(it - dual.patches.begin()), dual, store);
}

bool patch_order_less(const PatchRef& a, const PatchRef& b) {
    return std::tie(a.image_id, a.y, a.x, a.s) < std::tie(b.image_id, b.y, b.x, b.s);
}

std::vector<PatchRef> SelectionReport::chosen() const {
    std::vector<PatchRef> out;
    for (const auto& c : clusters) out.push_back(c.chosen().patch);
    return out;
}

SelectionReport cps_select(const DualClustering& dual, const FeatureStore& store, Ablation ablation) {
    SelectionReport report;
    report.ablation = ablation;
    report.clusters.resize(static_cast<std::size_t>(dual.K1));

    parallel_for(report.clusters.size(), [&](std::size_t ku) {
        const int k = static_cast<int>(ku);
        ClusterSelection& sel = report.clusters[ku];
        sel.cluster = k;
        const FineClustering& fine = dual.fine.at(ku);
        sel.largest_fine = largest_fine_cluster(fine);
        sel.largest_fine_size = fine.model.sizes.at(static_cast<std::size_t>(sel.largest_fine));

        for (std::size_t i : dual.members(k)) {
            RankedPatch r;
            r.patch_index = i;
            r.patch = dual.patches[i];
            r.terms = criterion_terms(i, dual, store);
            r.score = ablated_score(r.terms, ablation);
            sel.ranking.push_back(std::move(r));
        }
        if (sel.ranking.empty()) throw Error("coarse cluster " + std::to_string(k) + " has no members");
        std::sort(sel.ranking.begin(), sel.ranking.end(), [](const RankedPatch& a, const RankedPatch& b) {
            if (a.score != b.score) return a.score < b.score;
            return patch_order_less(a.patch, b.patch);
        });
    });
    return report;
}

namespace {

nlohmann::json patch_json(const PatchRef& p) {
    return {{"image_id", p.image_id}, {"x", p.x}, {"y", p.y}, {"s", p.s}};
}

PatchRef patch_from_json(const nlohmann::json& j) {
    return PatchRef{j.at("image_id").get<std::string>(), j.at("x").get<int>(), j.at("y").get<int>(),
                    j.at("s").get<int>()};
}

nlohmann::json terms_json(const CriterionTerms& t) {
    return {{"d1", t.d1}, {"d2", t.d2}, {"d3", t.d3}, {"total", t.total}};
}

CriterionTerms terms_from_json(const nlohmann::json& j) {
    return CriterionTerms{j.at("d1").get<double>(), j.at("d2").get<double>(), j.at("d3").get<double>(),
                          j.at("total").get<double>()};
}

}  // namespace

nlohmann::json to_json(const SelectionReport& report) {
    nlohmann::json doc;
    doc["ablation"] = to_string(report.ablation);
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& c : report.clusters) {
        nlohmann::json ranking = nlohmann::json::array();
        for (const auto& r : c.ranking) {
            ranking.push_back({{"patch_index", r.patch_index},
                               {"patch", patch_json(r.patch)},
                               {"terms", terms_json(r.terms)},
                               {"score", r.score}});
        }
        clusters.push_back({{"cluster", c.cluster},
                            {"chosen", patch_json(c.chosen().patch)},
                            {"terms", terms_json(c.chosen().terms)},
                            {"largest_fine_cluster", c.largest_fine},
                            {"largest_fine_size", c.largest_fine_size},
                            {"ranking", ranking}});
    }
    doc["clusters"] = clusters;
    return doc;
}

SelectionReport selection_from_json(const nlohmann::json& doc) {
    try {
        SelectionReport report;
        report.ablation = parse_ablation(doc.at("ablation").get<std::string>());
        for (const auto& c : doc.at("clusters")) {
            ClusterSelection sel;
            sel.cluster = c.at("cluster").get<int>();
            sel.largest_fine = c.at("largest_fine_cluster").get<int>();
            sel.largest_fine_size = c.at("largest_fine_size").get<std::size_t>();
            for (const auto& r : c.at("ranking")) {
                sel.ranking.push_back(RankedPatch{r.at("patch_index").get<std::size_t>(), patch_from_json(r.at("patch")),
                                                  terms_from_json(r.at("terms")), r.at("score").get<double>()});
            }
            if (sel.ranking.empty()) throw Error("selection report cluster without ranking");
            report.clusters.push_back(std::move(sel));
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed selection report: ") + e.what());
    }
}

std::string terms_csv(const SelectionReport& report) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "cluster,rank,image_id,x,y,s,d1,d2,d3,total,score\n";
    for (const auto& c : report.clusters) {
        for (std::size_t rank = 0; rank < c.ranking.size(); ++rank) {
            const auto& r = c.ranking[rank];
            out << c.cluster << ',' << rank << ',' << r.patch.image_id << ',' << r.patch.x << ',' << r.patch.y << ','
                << r.patch.s << ',' << r.terms.d1 << ',' << r.terms.d2 << ',' << r.terms.d3 << ',' << r.terms.total
                << ',' << r.score << '\n';
        }
    }
    return out.str();
}

namespace {

// First k entries of a seeded partial Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace

std::vector<PatchRef> baseline_rnd_crop(std::span<const PatchRef> pool, int K1, std::uint64_t seed) {
    if (K1 < 1) throw Error("K1 must be >= 1");
    if (pool.size() < static_cast<std::size_t>(K1)) {
        throw Error("RndCrop: pool of " + std::to_string(pool.size()) + " patches is smaller than K1=" +
                    std::to_string(K1));
    }
    std::vector<PatchRef> out;
    for (std::size_t i : sample_without_replacement(pool.size(), static_cast<std::size_t>(K1), seed)) {
        out.push_back(pool[i]);
    }
    return out;
}

PatchRef center_patch(const std::string& image_id, int width, int height, int s) {
    return PatchRef{image_id, (width - s) / 2, (height - s) / 2, s};
}

std::vector<PatchRef> baseline_rnd_cen_crop(std::span<const ImageRecord> images, int K1, int s, std::uint64_t seed) {
    validate_patch_side(s);
    if (K1 < 1) throw Error("K1 must be >= 1");
    std::vector<const ImageRecord*> admissible;
    for (const auto& img : images) {
        if (img.width >= s && img.height >= s) admissible.push_back(&img);
    }
    if (admissible.size() < static_cast<std::size_t>(K1)) {
        throw Error("RndCenCrop: only " + std::to_string(admissible.size()) + " images admit s=" + std::to_string(s) +
                    ", need K1=" + std::to_string(K1));
    }
    std::vector<PatchRef> out;
    for (std::size_t i : sample_without_replacement(admissible.size(), static_cast<std::size_t>(K1), seed)) {
        const ImageRecord& img = *admissible[i];
        out.push_back(center_patch(img.id, img.width, img.height, s));
    }
    return out;
}

}  // namespace nucsel
