#include "nucsel/clustering.hpp"

namespace nucsel {

DualClustering dual_level_clustering(std::span<const PatchRef> patches, const FeatureStore& store, int K1, int K2,
                                     std::uint64_t seed, const KMeansOptions& opts) {
    if (K2 < 1) throw Error("K2 must be >= 1");
    if (patches.size() < static_cast<std::size_t>(std::max(K1, 1))) {
        throw Error("dual_level_clustering: " + std::to_string(patches.size()) + " patches cannot form K1=" +
                    std::to_string(K1) + " clusters");
    }

    DualClustering dual;
    dual.K1 = K1;
    dual.K2 = K2;
    dual.seed = seed;
    dual.patches.assign(patches.begin(), patches.end());

    std::vector<std::string> patch_keys;
    patch_keys.reserve(patches.size());
    for (const auto& p : patches) patch_keys.push_back(feature_key(p));
    dual.coarse = kmeans(store.gather(patch_keys), K1, seed, opts);

    dual.fine.resize(static_cast<std::size_t>(K1));
    for (int k = 0; k < K1; ++k) {
        FineClustering& fine = dual.fine[static_cast<std::size_t>(k)];
        for (std::size_t i : dual.members(k)) {
            for (const auto& r : crop2(dual.patches[i])) fine.regions.push_back(r);
        }
        if (fine.regions.size() < static_cast<std::size_t>(K2)) {
            throw Error("coarse cluster " + std::to_string(k) + " has only " + std::to_string(fine.regions.size()) +
                        " sub-regions, fewer than K2=" + std::to_string(K2) + "; use a smaller K2");
        }
        std::vector<std::string> keys;
        keys.reserve(fine.regions.size());
        for (const auto& r : fine.regions) keys.push_back(feature_key(r));
        fine.model = kmeans(store.gather(keys), K2, derive_seed(seed, static_cast<std::uint64_t>(k)), opts);
    }
    return dual;
}

nlohmann::json cluster_dump(const KMeansModel<double>& model) {
    nlohmann::json centers = nlohmann::json::array();
    for (Eigen::Index k = 0; k < model.centers.rows(); ++k) {
        const Eigen::RowVectorXd row = model.centers.row(k);
        centers.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    return {{"K", model.K},
            {"seed", model.seed},
            {"iterations", model.iterations},
            {"converged", model.converged},
            {"distortion", model.distortion},
            {"assignment", model.assignment},
            {"sizes", model.sizes},
            {"centers", centers},
            {"log", model.log}};
}

KMeansModel<double> cluster_from_json(const nlohmann::json& doc) {
    try {
        KMeansModel<double> m;
        m.K = doc.at("K").get<int>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.iterations = doc.at("iterations").get<int>();
        m.converged = doc.value("converged", false);
        m.distortion = doc.at("distortion").get<double>();
        m.assignment = doc.at("assignment").get<std::vector<int>>();
        m.sizes = doc.at("sizes").get<std::vector<std::size_t>>();
        m.log = doc.value("log", std::vector<std::string>{});
        const auto rows = doc.at("centers").get<std::vector<std::vector<double>>>();
        if (rows.size() != static_cast<std::size_t>(m.K) || m.sizes.size() != rows.size()) {
            throw Error("cluster dump: center count does not match K");
        }
        const std::size_t dim = rows.empty() ? 0 : rows.front().size();
        m.centers.resize(m.K, static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].size() != dim) throw Error("cluster dump: ragged centers");
            for (std::size_t j = 0; j < dim; ++j) {
                m.centers(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[k][j];
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed cluster dump: ") + e.what());
    }
}

nlohmann::json cluster_dump(const DualClustering& dual) {
    nlohmann::json doc;
    doc["K1"] = dual.K1;
    doc["K2"] = dual.K2;
    doc["seed"] = dual.seed;
    nlohmann::json patches = nlohmann::json::array();
    for (const auto& p : dual.patches) patches.push_back({{"image_id", p.image_id}, {"x", p.x}, {"y", p.y}, {"s", p.s}});
    doc["patches"] = patches;
    doc["coarse"] = cluster_dump(dual.coarse);
    nlohmann::json fine = nlohmann::json::array();
    for (const auto& f : dual.fine) {
        nlohmann::json d = cluster_dump(f.model);
        nlohmann::json rk = nlohmann::json::array();
        for (const auto& r : f.regions) rk.push_back(feature_key(r));
        d["regions"] = rk;
        fine.push_back(d);
    }
    doc["fine"] = fine;
    return doc;
}

DualClustering dual_from_json(const nlohmann::json& doc) {
    try {
        DualClustering dual;
        dual.K1 = doc.at("K1").get<int>();
        dual.K2 = doc.at("K2").get<int>();
        dual.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& p : doc.at("patches")) {
            dual.patches.push_back(PatchRef{p.at("image_id").get<std::string>(), p.at("x").get<int>(),
                                            p.at("y").get<int>(), p.at("s").get<int>()});
        }
        dual.coarse = cluster_from_json(doc.at("coarse"));
        if (dual.coarse.assignment.size() != dual.patches.size()) {
            throw Error("cluster dump: coarse assignment does not cover every patch");
        }
        for (const auto& f : doc.at("fine")) {
            FineClustering fine;
            fine.model = cluster_from_json(f);
            dual.fine.push_back(std::move(fine));
        }
        if (dual.fine.size() != static_cast<std::size_t>(dual.K1)) throw Error("cluster dump: expected K1 fine clusterings");
        for (int k = 0; k < dual.K1; ++k) {
            for (std::size_t i : dual.members(k)) {
                for (const auto& r : crop2(dual.patches[i])) dual.fine[static_cast<std::size_t>(k)].regions.push_back(r);
            }
        }
        return dual;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed cluster dump: ") + e.what());
    }
}

}  // namespace nucsel
