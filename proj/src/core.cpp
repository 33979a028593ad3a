#include "nucsel/core.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "png_io.hpp"

namespace nucsel {

ImageRecord::ImageRecord(std::string id_, int w, int h)
    : id(std::move(id_)), width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

ImageView ImageRecord::view(int x, int y, int w, int h) const {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > width || y + h > height) {
        throw Error("view outside image " + id);
    }
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    const std::size_t offset = static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x) * 3;
    const std::size_t extent = static_cast<std::size_t>(h - 1) * stride + static_cast<std::size_t>(w) * 3;
    return ImageView{std::span<const std::uint8_t>(rgb).subspan(offset, extent), w, h, stride};
}

const char* to_string(Quadrant q) {
    switch (q) {
        case Quadrant::TL: return "TL";
        case Quadrant::TR: return "TR";
        case Quadrant::BL: return "BL";
        case Quadrant::BR: return "BR";
    }
    return "?";
}

std::string feature_key(const PatchRef& p) {
    return p.image_id + "@" + std::to_string(p.x) + "," + std::to_string(p.y) + "," + std::to_string(p.s);
}

std::string feature_key(const SubRegionRef& r) { return feature_key(r.parent) + "#" + to_string(r.quadrant); }

void validate_patch_side(int s) {
    if (s <= 0 || s % 2 != 0) throw Error("patch side s must be a positive even number, got " + std::to_string(s));
}

CropResult crop1(std::span<const ImageRecord> images, int s, int t) {
    if (images.empty()) throw Error("crop1: empty corpus");
    validate_patch_side(s);
    if (t < 1) throw Error("crop1: step t must be >= 1");

    CropResult out;
    for (const auto& img : images) {
        if (img.width < s || img.height < s) {
            out.warnings.push_back("image " + img.id + " (" + std::to_string(img.width) + "x" +
                                   std::to_string(img.height) + ") is smaller than s=" + std::to_string(s) +
                                   "; no patches sampled");
            continue;
        }
        for (int y = 0; y <= img.height - s; y += t) {
            for (int x = 0; x <= img.width - s; x += t) out.patches.push_back(PatchRef{img.id, x, y, s});
        }
    }
    return out;
}

std::array<SubRegionRef, 4> crop2(const PatchRef& patch) {
    validate_patch_side(patch.s);
    return {SubRegionRef{patch, Quadrant::TL}, SubRegionRef{patch, Quadrant::TR}, SubRegionRef{patch, Quadrant::BL},
            SubRegionRef{patch, Quadrant::BR}};
}

ImageRecord load_image_png(const std::filesystem::path& path, std::string id) {
    const detail::RawPng raw = detail::read_png(path);
    ImageRecord img(std::move(id), raw.width, raw.height);
    const int shift = raw.bit_depth == 16 ? 8 : 0;
    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint16_t* src = raw.samples.data() + i * raw.channels;
        std::uint8_t* dst = img.rgb.data() + i * 3;
        if (raw.channels <= 2) {
            dst[0] = dst[1] = dst[2] = static_cast<std::uint8_t>(src[0] >> shift);
        } else {
            for (int c = 0; c < 3; ++c) dst[c] = static_cast<std::uint8_t>(src[c] >> shift);
        }
    }
    return img;
}

void save_image_png(const ImageRecord& image, const std::filesystem::path& path) {
    std::vector<std::uint16_t> samples(image.rgb.begin(), image.rgb.end());
    detail::write_png(path, image.width, image.height, 3, 8, samples);
}

std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw Error("cannot open corpus manifest " + manifest.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("corpus manifest " + manifest.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw Error("corpus manifest must be a JSON list of {id, path}");

    std::vector<CorpusEntry> entries;
    std::set<std::string> seen;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("id") || !item.contains("path")) {
            throw Error("corpus manifest entry missing id or path");
        }
        CorpusEntry e{item.at("id").get<std::string>(), item.at("path").get<std::string>()};
        if (!seen.insert(e.id).second) throw Error("duplicate image id in corpus: " + e.id);
        if (e.path.is_relative()) e.path = manifest.parent_path() / e.path;
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_corpus_manifest(std::span<const CorpusEntry> entries, const std::filesystem::path& manifest) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& e : entries) doc.push_back({{"id", e.id}, {"path", e.path.string()}});
    std::ofstream out(manifest);
    if (!out) throw Error("cannot write " + manifest.string());
    out << doc.dump(2) << "\n";
}

std::vector<ImageRecord> load_corpus(const std::filesystem::path& manifest) {
    std::vector<ImageRecord> images;
    for (const auto& e : read_corpus_manifest(manifest)) images.push_back(load_image_png(e.path, e.id));
    return images;
}

const ImageRecord& find_image(std::span<const ImageRecord> images, const std::string& id) {
    for (const auto& img : images) {
        if (img.id == id) return img;
    }
    throw Error("unknown image id " + id);
}

}  // namespace nucsel
