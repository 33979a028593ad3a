#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nucsel/common.hpp"

namespace nucsel {

/// Read-only window into interleaved 8-bit RGB pixels.
struct ImageView {
    std::span<const std::uint8_t> data;  // starts at the window's top-left pixel
    int width = 0;
    int height = 0;
    std::size_t stride = 0;  // bytes per source row

    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x) * 3;
    }
    bool empty() const { return width <= 0 || height <= 0; }
};

/// A decoded corpus image, always 8-bit RGB.
struct ImageRecord {
    std::string id;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    ImageRecord() = default;
    ImageRecord(std::string id_, int w, int h);

    std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int x, int y) const {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    ImageView view() const { return view(0, 0, width, height); }
    /// Sub-window view; throws if it leaves the image.
    ImageView view(int x, int y, int w, int h) const;
};

struct PatchRef {
    std::string image_id;
    int x = 0;
    int y = 0;
    int s = 0;

    auto operator<=>(const PatchRef&) const = default;
    bool operator==(const PatchRef&) const = default;
};

enum class Quadrant : std::uint8_t { TL = 0, TR = 1, BL = 2, BR = 3 };

inline constexpr std::array<Quadrant, 4> kQuadrants{Quadrant::TL, Quadrant::TR, Quadrant::BL, Quadrant::BR};

const char* to_string(Quadrant q);

struct SubRegionRef {
    PatchRef parent;
    Quadrant quadrant = Quadrant::TL;

    int side() const { return parent.s / 2; }
    int x() const { return parent.x + ((quadrant == Quadrant::TR || quadrant == Quadrant::BR) ? side() : 0); }
    int y() const { return parent.y + ((quadrant == Quadrant::BL || quadrant == Quadrant::BR) ? side() : 0); }

    bool operator==(const SubRegionRef&) const = default;
};

/// Stable string keys used by feature stores and files.
std::string feature_key(const PatchRef& p);
std::string feature_key(const SubRegionRef& r);

struct CropResult {
    std::vector<PatchRef> patches;
    std::vector<std::string> warnings;
};

/// Sliding-window patch sampling. Positions run 0, t, 2t, ... while the
/// window stays inside the image; row-major per image, images in input order.
/// Images smaller than s contribute nothing and add a warning.
CropResult crop1(std::span<const ImageRecord> images, int s, int t);

/// Splits a patch into its TL, TR, BL, BR quadrants of side s/2.
std::array<SubRegionRef, 4> crop2(const PatchRef& patch);

/// Throws if s is not a positive even number.
void validate_patch_side(int s);

// ---------------------------------------------------------------------------
// Corpus I/O
// ---------------------------------------------------------------------------

/// Decodes any 8/16-bit PNG to 8-bit RGB (gray replicated, alpha dropped).
ImageRecord load_image_png(const std::filesystem::path& path, std::string id);
void save_image_png(const ImageRecord& image, const std::filesystem::path& path);

struct CorpusEntry {
    std::string id;
    std::filesystem::path path;
};

/// Reads a JSON list of {id, path}. Relative paths resolve against the
/// manifest's directory. Ids must be unique.
std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& manifest);
void write_corpus_manifest(std::span<const CorpusEntry> entries, const std::filesystem::path& manifest);

std::vector<ImageRecord> load_corpus(const std::filesystem::path& manifest);

const ImageRecord& find_image(std::span<const ImageRecord> images, const std::string& id);

}  // namespace nucsel
