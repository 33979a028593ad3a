#include "nucsel/mask.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "png_io.hpp"

namespace nucsel {

std::size_t InstanceMask::instance_count() const {
    std::set<std::uint32_t> ids(labels_.data(), labels_.data() + labels_.size());
    ids.erase(0);
    return ids.size();
}

bool InstanceMask::is_canonical() const { return max_id() == instance_count(); }

InstanceMask canonicalize(const InstanceMask& mask, IdRemap* remap) {
    std::set<std::uint32_t> ids(mask.labels().data(), mask.labels().data() + mask.labels().size());
    ids.erase(0);
    IdRemap table;
    std::uint32_t next = 1;
    for (std::uint32_t id : ids) table[id] = next++;

    InstanceMask out(mask.width(), mask.height());
    const auto& src = mask.labels();
    auto& dst = out.labels();
    for (Eigen::Index i = 0; i < src.size(); ++i) {
        const std::uint32_t v = src.data()[i];
        dst.data()[i] = v == 0 ? 0 : table.at(v);
    }
    if (remap) *remap = std::move(table);
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& png) {
    std::filesystem::path p = png;
    p.replace_extension(".json");
    return p;
}

void save_mask(const InstanceMask& mask, const std::filesystem::path& png, const MaskSidecar& sidecar) {
    if (mask.max_id() > kMaxInstances) {
        throw Error("instance id overflow: " + std::to_string(mask.max_id()) + " > 65535 in " + png.string());
    }
    std::vector<std::uint16_t> samples(static_cast<std::size_t>(mask.labels().size()));
    for (Eigen::Index i = 0; i < mask.labels().size(); ++i) {
        samples[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(mask.labels().data()[i]);
    }
    detail::write_png(png, mask.width(), mask.height(), 1, 16, samples);

    nlohmann::json side = {{"source_image", sidecar.source_image},
                           {"offset", {sidecar.offset_x, sidecar.offset_y}},
                           {"instance_count", sidecar.instance_count}};
    std::ofstream out(sidecar_path(png));
    if (!out) throw Error("cannot write sidecar for " + png.string());
    out << side.dump(2) << "\n";
}

void save_mask(const InstanceMask& mask, const std::filesystem::path& png) {
    save_mask(mask, png, MaskSidecar{"", 0, 0, mask.instance_count()});
}

LoadedMask load_mask(const std::filesystem::path& png) {
    const detail::RawPng raw = detail::read_png(png);
    if (raw.channels != 1) {
        throw Error("mask " + png.string() + " must be single-channel grayscale, found " +
                    std::to_string(raw.channels) + " channels");
    }
    InstanceMask mask(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.samples.size(); ++i) mask.labels().data()[i] = raw.samples[i];

    LoadedMask out;
    out.mask = canonicalize(mask, &out.remap);

    const auto side_path = sidecar_path(png);
    if (std::filesystem::exists(side_path)) {
        std::ifstream in(side_path);
        try {
            const auto doc = nlohmann::json::parse(in);
            MaskSidecar side;
            side.source_image = doc.value("source_image", std::string{});
            if (doc.contains("offset")) {
                side.offset_x = doc.at("offset").at(0).get<int>();
                side.offset_y = doc.at("offset").at(1).get<int>();
            }
            side.instance_count = doc.value("instance_count", std::size_t{0});
            out.sidecar = side;
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed mask sidecar " + side_path.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace nucsel
