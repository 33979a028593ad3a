#pragma once

// Synthetic corpora, masks and feature stores shared by the unit and
// acceptance suites.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "nucsel/clustering.hpp"
#include "nucsel/core.hpp"
#include "nucsel/features.hpp"
#include "nucsel/mask.hpp"

namespace nucsel::testing {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "nucsel") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline ImageRecord solid_image(const std::string& id, int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    ImageRecord img(id, w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t* p = img.pixel(x, y);
            p[0] = r, p[1] = g, p[2] = b;
        }
    }
    return img;
}

/// Procedural texture families with distinct color and structure:
///   0 reddish horizontal stripes, 1 bluish vertical stripes,
///   2 greenish checkerboard, 3 grey diagonal stripes.
inline void paint_texture(ImageRecord& img, int family, std::uint64_t seed, int x0 = 0, int y0 = 0, int w = -1,
                          int h = -1) {
    if (w < 0) w = img.width;
    if (h < 0) h = img.height;
    static constexpr std::uint8_t kColors[4][2][3] = {{{210, 70, 60}, {150, 40, 40}},
                                                      {{60, 70, 210}, {30, 40, 140}},
                                                      {{70, 190, 70}, {30, 120, 40}},
                                                      {{170, 170, 170}, {90, 90, 90}}};
    Rng rng(seed);
    const int f = family % 4;
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
            bool alt = false;
            switch (f) {
                case 0: alt = (y / 4) % 2; break;
                case 1: alt = (x / 4) % 2; break;
                case 2: alt = ((x / 6) + (y / 6)) % 2; break;
                case 3: alt = ((x + y) / 5) % 2; break;
            }
            std::uint8_t* p = img.pixel(x, y);
            for (int c = 0; c < 3; ++c) {
                const int noise = static_cast<int>(rng.below(21)) - 10;
                p[c] = static_cast<std::uint8_t>(std::clamp(kColors[f][alt][c] + noise, 0, 255));
            }
        }
    }
}

inline ImageRecord texture_image(const std::string& id, int w, int h, int family, std::uint64_t seed) {
    ImageRecord img(id, w, h);
    paint_texture(img, family, seed);
    return img;
}

/// Writes `count` textured PNGs plus manifest.json; image i uses family i % families.
inline fs::path write_texture_corpus(const fs::path& dir, int count, int size, int families, std::uint64_t seed) {
    fs::create_directories(dir);
    std::vector<CorpusEntry> entries;
    for (int i = 0; i < count; ++i) {
        const std::string id = "img" + std::to_string(i);
        save_image_png(texture_image(id, size, size, i % families, derive_seed(seed, static_cast<std::uint64_t>(i))),
                       dir / (id + ".png"));
        entries.push_back({id, id + ".png"});
    }
    write_corpus_manifest(entries, dir / "manifest.json");
    return dir / "manifest.json";
}

inline void stamp_disk(InstanceMask& m, int cx, int cy, int r, std::uint32_t id) {
    for (int y = std::max(0, cy - r); y <= std::min(m.height() - 1, cy + r); ++y) {
        for (int x = std::max(0, cx - r); x <= std::min(m.width() - 1, cx + r); ++x) {
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m(x, y) = id;
        }
    }
}

inline void stamp_ellipse(InstanceMask& m, double cx, double cy, double a, double b, double angle, std::uint32_t id) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            const double dx = x - cx, dy = y - cy;
            const double u = (dx * ca + dy * sa) / a, v = (-dx * sa + dy * ca) / b;
            if (u * u + v * v <= 1.0) m(x, y) = id;
        }
    }
}

/// A small annotated patch: several separated elliptical nuclei.
inline InstanceMask nuclei_source_mask() {
    InstanceMask m(64, 64);
    stamp_ellipse(m, 12, 12, 6, 4, 0.3, 1);
    stamp_ellipse(m, 40, 10, 5, 5, 0.0, 2);
    stamp_ellipse(m, 25, 34, 8, 5, 1.1, 3);
    stamp_ellipse(m, 52, 44, 4, 6, 0.5, 4);
    stamp_ellipse(m, 12, 52, 5, 3, 2.0, 5);
    return m;
}

/// Random instance map: up to `max_instances` random rectangles/disks,
/// later ones overwriting earlier ones.
inline InstanceMask random_instance_map(Rng& rng, int w, int h, int max_instances) {
    InstanceMask m(w, h);
    const int n = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_instances) + 1));
    for (int i = 1; i <= n; ++i) {
        const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
        const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(2, w / 4))));
        if (rng.below(2)) {
            stamp_disk(m, cx, cy, r, static_cast<std::uint32_t>(i));
        } else {
            for (int y = std::max(0, cy - r); y < std::min(h, cy + r); ++y) {
                for (int x = std::max(0, cx - r / 2); x < std::min(w, cx + r); ++x) m(x, y) = static_cast<std::uint32_t>(i);
            }
        }
    }
    return m;
}

/// Random feature fixture: `n` abstract patches (ids only) with random
/// patch and quadrant vectors of dimension `dim`.
struct FeatureFixture {
    std::vector<PatchRef> patches;
    FeatureStore store;
};

inline FeatureFixture random_feature_fixture(Rng& rng, int n, int dim) {
    FeatureFixture fx{{}, FeatureStore(dim)};
    for (int i = 0; i < n; ++i) {
        PatchRef p{"img" + std::to_string(i % 3), 2 * i, 4 * (i % 5), 2};
        fx.patches.push_back(p);
        FeatureVector v(dim);
        for (int d = 0; d < dim; ++d) v(d) = static_cast<float>(rng.uniform(-1.0, 1.0));
        fx.store.add(feature_key(p), v);
        for (const auto& q : crop2(p)) {
            FeatureVector u(dim);
            for (int d = 0; d < dim; ++d) u(d) = static_cast<float>(v(d) + rng.uniform(-0.5, 0.5));
            fx.store.add(feature_key(q), u);
        }
    }
    return fx;
}

}  // namespace nucsel::testing
