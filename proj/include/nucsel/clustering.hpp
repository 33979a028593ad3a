#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "nucsel/core.hpp"
#include "nucsel/features.hpp"
#include "nucsel/kmeans.hpp"

namespace nucsel {

/// Fine-level clustering of one coarse cluster's quadrant sub-regions.
struct FineClustering {
    std::vector<SubRegionRef> regions;  // members' quadrants, member order then TL, TR, BL, BR
    KMeansModel<double> model;
};

struct DualClustering {
    int K1 = 0;
    int K2 = 0;
    std::uint64_t seed = 0;
    std::vector<PatchRef> patches;
    KMeansModel<double> coarse;
    std::vector<FineClustering> fine;  // one per coarse cluster

    /// Patch indices of coarse cluster k, ascending.
    std::vector<std::size_t> members(int k) const { return coarse.members(k); }
};

/// Coarse K-means over patch features, then an independent K-means over the
/// sub-region features of each coarse cluster. The coarse run uses `seed`,
/// fine run k uses derive_seed(seed, k). A coarse cluster whose sub-region
/// count is below K2 is an error.
DualClustering dual_level_clustering(std::span<const PatchRef> patches, const FeatureStore& store, int K1, int K2,
                                     std::uint64_t seed, const KMeansOptions& opts = {});

/// {K, seed, iterations, distortion, assignment} plus sizes, centers and the
/// repair log, enough to rebuild the model.
nlohmann::json cluster_dump(const KMeansModel<double>& model);
KMeansModel<double> cluster_from_json(const nlohmann::json& doc);

/// Coarse dump plus one dump per fine clustering, with patch and region keys.
nlohmann::json cluster_dump(const DualClustering& dual);
DualClustering dual_from_json(const nlohmann::json& doc);

}  // namespace nucsel
