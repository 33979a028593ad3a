#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nucsel/clustering.hpp"

namespace nucsel {

/// The three selection cost terms of one patch. Lower is better.
struct CriterionTerms {
    double d1 = 0;  // distance of f(x) to its coarse center
    double d2 = 0;  // mean distance of the 4 quadrant features to the largest fine cluster's center
    double d3 = 0;  // max pairwise distance among the 4 quadrant features
    double total = 0;  // d1 + d2 + d3
};

enum class Ablation { Full, DropD2, DropD3, KMeansOnly };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& name);  // full | drop_d2 | drop_d3 | kmeans_only

/// Score minimized under an ablation: full sums all terms, drop_d2 omits d2,
/// drop_d3 omits d3, kmeans_only is d1 alone.
double ablated_score(const CriterionTerms& t, Ablation a);

/// Index of the fine cluster with the most sub-regions (ties: lowest index).
int largest_fine_cluster(const FineClustering& fine);

CriterionTerms criterion_terms(std::size_t patch_index, const DualClustering& dual, const FeatureStore& store);
CriterionTerms criterion_terms(const PatchRef& patch, const DualClustering& dual, const FeatureStore& store);

/// Equal scores are broken by the lexicographically smallest (image_id, y, x).
bool patch_order_less(const PatchRef& a, const PatchRef& b);

struct RankedPatch {
    std::size_t patch_index = 0;
    PatchRef patch;
    CriterionTerms terms;
    double score = 0;
};

struct ClusterSelection {
    int cluster = 0;
    int largest_fine = 0;
    std::size_t largest_fine_size = 0;
    std::vector<RankedPatch> ranking;  // every member, best first; ranking[0] is the choice

    const RankedPatch& chosen() const { return ranking.front(); }
};

struct SelectionReport {
    Ablation ablation = Ablation::Full;
    std::vector<ClusterSelection> clusters;  // exactly K1, in cluster order

    std::vector<PatchRef> chosen() const;
};

/// Per coarse cluster, the member minimizing the (ablated) criterion.
SelectionReport cps_select(const DualClustering& dual, const FeatureStore& store, Ablation ablation = Ablation::Full);

nlohmann::json to_json(const SelectionReport& report);
SelectionReport selection_from_json(const nlohmann::json& doc);

/// CSV header plus one row per patch: cluster,rank,image_id,x,y,s,d1,d2,d3,total,score
std::string terms_csv(const SelectionReport& report);

// ---------------------------------------------------------------------------
// Random baselines
// ---------------------------------------------------------------------------

/// K1 distinct patches drawn uniformly without replacement from the pool.
std::vector<PatchRef> baseline_rnd_crop(std::span<const PatchRef> pool, int K1, std::uint64_t seed);

/// K1 distinct images drawn uniformly among those at least s x s, each
/// contributing its centered s x s patch.
std::vector<PatchRef> baseline_rnd_cen_crop(std::span<const ImageRecord> images, int K1, int s, std::uint64_t seed);

/// Centered patch position for an image of the given size.
PatchRef center_patch(const std::string& image_id, int width, int height, int s);

}  // namespace nucsel
