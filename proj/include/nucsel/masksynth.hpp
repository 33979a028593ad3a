#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nucsel/mask.hpp"

namespace nucsel {

/// One nucleus footprint cropped to its bounding box.
struct NucleusShape {
    BinaryMap footprint;  // rows = height; a single 8-connected component
    double cx = 0;        // centroid, bounding-box pixel coordinates
    double cy = 0;
    double R = 0;         // max distance from centroid to a boundary pixel
    std::string origin;   // transform that produced it, e.g. "rot90"

    int width() const { return static_cast<int>(footprint.cols()); }
    int height() const { return static_cast<int>(footprint.rows()); }
    std::size_t area() const { return static_cast<std::size_t>(footprint.count()); }
};

/// Centroid and boundary radius for a footprint. Boundary pixels are
/// foreground pixels with a 4-neighbour outside the footprint.
NucleusShape make_shape(BinaryMap footprint, std::string origin = {});

struct TransformSet {
    bool flips = true;      // horizontal and vertical
    bool rotations = true;  // 90, 180, 270 degrees
    int random_crops = 4;   // whole-mask crops; clipped nuclei are kept
    double min_crop_fraction = 0.5;
    std::uint64_t seed = 0;
};

struct NucleusBank {
    std::vector<NucleusShape> shapes;
    // Source statistics used for the default placement count.
    std::size_t source_instances = 0;
    int source_width = 0;
    int source_height = 0;
};

/// Harvests every nucleus of the mask and of each transformed copy. Each
/// 8-connected component of an instance becomes one shape; single-pixel
/// components (R = 0) are skipped.
NucleusBank build_nucleus_bank(const InstanceMask& mask, const TransformSet& transforms = {});

// Whole-map transforms.
LabelMap flip_horizontal(const LabelMap& m);
LabelMap flip_vertical(const LabelMap& m);
LabelMap rotate90(const LabelMap& m);  // counter-clockwise
BinaryMap rotate90(const BinaryMap& m);

/// The 8 images of a footprint under the dihedral group of the square.
std::array<BinaryMap, 8> dihedral_orbit(const BinaryMap& footprint);

/// Exact squared Euclidean distance from each pixel to the nearest set pixel
/// (+inf when none is set).
Eigen::ArrayXXd squared_distance_transform(const BinaryMap& occupied);

/// Dilation by a discrete disk {(dx, dy) : dx^2 + dy^2 <= r^2}.
BinaryMap dilate_disk(const BinaryMap& occupied, int r);

struct SynthMaskConfig {
    std::optional<int> Q;  // placements; default derived from source density
    int canvas_height = 320;
    int canvas_width = 320;
    int height = 256;
    int width = 256;
    std::uint64_t seed = 0;
    int retry_budget = 100;
};

/// Throws if the final crop exceeds the canvas or Q < 0.
void validate(const SynthMaskConfig& cfg);

/// round(rho * U[0.8, 1.2]) with rho the source instance count scaled by
/// canvas area over source area.
int default_placement_count(const NucleusBank& bank, const SynthMaskConfig& cfg, Rng& rng);

struct Placement {
    std::size_t shape = 0;  // index into the bank
    int x = 0;              // top-left of the footprint on the canvas
    int y = 0;
    std::uint32_t id = 0;   // canvas instance id
};

struct SynthResult {
    InstanceMask mask;    // final crop, canonical ids
    InstanceMask canvas;  // working canvas before cropping
    int requested = 0;
    int placed = 0;
    int crop_x = 0;
    int crop_y = 0;
    std::vector<Placement> placements;
    std::vector<std::string> warnings;
};

/// Places nuclei drawn from the bank one at a time on an empty canvas. Each
/// placement dilates the occupied pixels by ceil(R) of the drawn nucleus,
/// picks a uniform centroid position among the remaining background pixels
/// whose bounding box fits the canvas, and rejects placements that would
/// touch an earlier nucleus (8-neighbourhood). After retry_budget failed
/// draws the run stops early with a warning. The canvas is finally cropped
/// at a random offset.
SynthResult synthesize_mask(const NucleusBank& bank, const SynthMaskConfig& cfg);

/// `count` independent masks; mask i uses derive_seed(cfg.seed, i).
std::vector<SynthResult> synthesize_batch(const NucleusBank& bank, const SynthMaskConfig& cfg, int count);

}  // namespace nucsel
