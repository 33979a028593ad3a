#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "nucsel/common.hpp"

namespace nucsel {

/// Per-pixel instance ids, rows = height. 0 is background.
using LabelMap = Eigen::Array<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary foreground map, rows = height.
using BinaryMap = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::uint32_t kMaxInstances = 65535;

class InstanceMask {
public:
    InstanceMask() = default;
    InstanceMask(int width, int height) : labels_(LabelMap::Zero(height, width)) {}
    explicit InstanceMask(LabelMap labels) : labels_(std::move(labels)) {}

    int width() const { return static_cast<int>(labels_.cols()); }
    int height() const { return static_cast<int>(labels_.rows()); }

    const LabelMap& labels() const { return labels_; }
    LabelMap& labels() { return labels_; }

    std::uint32_t operator()(int x, int y) const { return labels_(y, x); }
    std::uint32_t& operator()(int x, int y) { return labels_(y, x); }

    /// Largest id present (0 for an all-background map).
    std::uint32_t max_id() const { return labels_.size() == 0 ? 0 : labels_.maxCoeff(); }

    /// Number of distinct non-zero ids.
    std::size_t instance_count() const;

    /// True if the present ids are exactly 1..N.
    bool is_canonical() const;

    BinaryMap foreground() const { return labels_ > 0u; }

    bool operator==(const InstanceMask& o) const {
        return labels_.rows() == o.labels_.rows() && labels_.cols() == o.labels_.cols() &&
               (labels_ == o.labels_).all();
    }

private:
    LabelMap labels_;
};

/// old id -> new id, for every non-zero id that was present.
using IdRemap = std::map<std::uint32_t, std::uint32_t>;

/// Relabels ids to 1..N in ascending order of the original ids. Idempotent.
InstanceMask canonicalize(const InstanceMask& mask, IdRemap* remap = nullptr);

struct MaskSidecar {
    std::string source_image;
    int offset_x = 0;
    int offset_y = 0;
    std::size_t instance_count = 0;

    bool operator==(const MaskSidecar&) const = default;
};

struct LoadedMask {
    InstanceMask mask;  // canonical
    IdRemap remap;      // identity entries included
    std::optional<MaskSidecar> sidecar;
};

/// Sidecar path for a mask file: `<stem>.json` next to the PNG.
std::filesystem::path sidecar_path(const std::filesystem::path& png);

/// Writes a 16-bit grayscale PNG plus its JSON sidecar. The mask is written
/// as given (callers canonicalize first if needed); ids above 65535 throw.
void save_mask(const InstanceMask& mask, const std::filesystem::path& png, const MaskSidecar& sidecar);
void save_mask(const InstanceMask& mask, const std::filesystem::path& png);

/// Reads a grayscale PNG (16- or 8-bit) and its sidecar if present, then
/// canonicalizes ids. Non-grayscale files throw.
LoadedMask load_mask(const std::filesystem::path& png);

}  // namespace nucsel
