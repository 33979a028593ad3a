#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "nucsel/core.hpp"

namespace nucsel {

using FeatureVector = Eigen::VectorXf;

/// Dimension of the built-in descriptor: 24 color-histogram bins,
/// 8 gradient-orientation bins, 3 channel means and 3 channel deviations.
inline constexpr int kBuiltinDim = 38;

/// Deterministic texture/color descriptor, independent of the block size.
///
/// Layout:
///   [0, 24)  8-bin histogram per channel (R, G, B), each channel L1-normalized
///   [24, 32) unsigned gradient orientation over [0, pi), magnitude weighted,
///            L1-normalized; all zeros when the block has no gradient
///   [32, 35) channel means in [0, 1]
///   [35, 38) channel population standard deviations in [0, 1]
///
/// Gradients are central differences of the luma image (0.299, 0.587, 0.114)
/// with edge replication.
FeatureVector extract_builtin(const ImageView& block);

/// Key -> fixed-dimension float vector. Built by a single writer, then read-only.
class FeatureStore {
public:
    using ConstRow = Eigen::Map<const FeatureVector>;

    FeatureStore() = default;
    explicit FeatureStore(int dim);

    int dim() const { return dim_; }
    std::size_t size() const { return keys_.size(); }
    const std::vector<std::string>& keys() const { return keys_; }

    /// Appends a row. Throws on duplicate key, wrong dim, or non-finite values.
    void add(const std::string& key, const Eigen::Ref<const FeatureVector>& v);

    bool contains(const std::string& key) const { return index_.count(key) != 0; }
    ConstRow at(const std::string& key) const;
    ConstRow row(std::size_t i) const { return ConstRow(data_.data() + i * dim_, dim_); }

    /// Rows for `keys` in order, as double. Throws naming the first missing key.
    Eigen::MatrixXd gather(std::span<const std::string> keys) const;

    /// Scales every row to unit Euclidean norm (zero rows stay zero).
    void l2_normalize();

    bool operator==(const FeatureStore& o) const {
        return dim_ == o.dim_ && keys_ == o.keys_ && data_ == o.data_;
    }

private:
    int dim_ = 0;
    std::vector<std::string> keys_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Built-in features for every patch and its four quadrants, in patch order
/// (patch key followed by TL, TR, BL, BR keys). Parallel over patches.
FeatureStore build_builtin_store(std::span<const ImageRecord> images, std::span<const PatchRef> patches);

/// Throws naming the first key absent from the store.
void require_keys(const FeatureStore& store, std::span<const PatchRef> patches);

/// Feature file: "FPB1", u32 dim, u64 count, count*dim f32 (all little
/// endian), u64 index byte length, JSON array of keys in row order.
void export_features(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore import_features(const std::filesystem::path& path);

}  // namespace nucsel
