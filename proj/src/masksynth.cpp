#include "nucsel/masksynth.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace nucsel {

NucleusShape make_shape(BinaryMap footprint, std::string origin) {
    NucleusShape s;
    s.origin = std::move(origin);
    const Eigen::Index h = footprint.rows(), w = footprint.cols();
    double sx = 0, sy = 0, n = 0;
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            if (!footprint(y, x)) continue;
            sx += static_cast<double>(x);
            sy += static_cast<double>(y);
            n += 1;
        }
    }
    if (n == 0) throw Error("make_shape: empty footprint");
    s.cx = sx / n;
    s.cy = sy / n;

    auto inside = [&](Eigen::Index x, Eigen::Index y) { return x >= 0 && y >= 0 && x < w && y < h && footprint(y, x); };
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            if (!footprint(y, x)) continue;
            const bool boundary = !inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1);
            if (boundary) s.R = std::max(s.R, std::hypot(static_cast<double>(x) - s.cx, static_cast<double>(y) - s.cy));
        }
    }
    s.footprint = std::move(footprint);
    return s;
}

LabelMap flip_horizontal(const LabelMap& m) { return m.rowwise().reverse(); }
LabelMap flip_vertical(const LabelMap& m) { return m.colwise().reverse(); }
LabelMap rotate90(const LabelMap& m) { return m.transpose().colwise().reverse(); }
BinaryMap rotate90(const BinaryMap& m) { return m.transpose().colwise().reverse(); }

std::array<BinaryMap, 8> dihedral_orbit(const BinaryMap& footprint) {
    std::array<BinaryMap, 8> out;
    out[0] = footprint;
    for (std::size_t i = 1; i < 4; ++i) out[i] = rotate90(out[i - 1]);
    for (std::size_t i = 0; i < 4; ++i) out[i + 4] = out[i].rowwise().reverse();
    return out;
}

namespace {

// 8-connected components of each non-zero id, as tight footprints.
void harvest(const LabelMap& labels, const std::string& origin, std::vector<NucleusShape>& out) {
    const Eigen::Index h = labels.rows(), w = labels.cols();
    BinaryMap seen = BinaryMap::Constant(h, w, false);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> stack, pixels;

    for (Eigen::Index y0 = 0; y0 < h; ++y0) {
        for (Eigen::Index x0 = 0; x0 < w; ++x0) {
            const std::uint32_t id = labels(y0, x0);
            if (id == 0 || seen(y0, x0)) continue;
            pixels.clear();
            stack.assign(1, {y0, x0});
            seen(y0, x0) = true;
            Eigen::Index miny = y0, maxy = y0, minx = x0, maxx = x0;
            while (!stack.empty()) {
                const auto [y, x] = stack.back();
                stack.pop_back();
                pixels.emplace_back(y, x);
                miny = std::min(miny, y), maxy = std::max(maxy, y);
                minx = std::min(minx, x), maxx = std::max(maxx, x);
                for (Eigen::Index dy = -1; dy <= 1; ++dy) {
                    for (Eigen::Index dx = -1; dx <= 1; ++dx) {
                        const Eigen::Index ny = y + dy, nx = x + dx;
                        if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
                        if (seen(ny, nx) || labels(ny, nx) != id) continue;
                        seen(ny, nx) = true;
                        stack.emplace_back(ny, nx);
                    }
                }
            }
            if (pixels.size() < 2) continue;
            BinaryMap fp = BinaryMap::Constant(maxy - miny + 1, maxx - minx + 1, false);
            for (const auto& [y, x] : pixels) fp(y - miny, x - minx) = true;
            NucleusShape shape = make_shape(std::move(fp), origin);
            if (shape.R > 0) out.push_back(std::move(shape));
        }
    }
}

}  // namespace

NucleusBank build_nucleus_bank(const InstanceMask& mask, const TransformSet& transforms) {
    const std::size_t count = mask.instance_count();
    if (count == 0) throw Error("build_nucleus_bank: mask has no instances");

    NucleusBank bank;
    bank.source_instances = count;
    bank.source_width = mask.width();
    bank.source_height = mask.height();

    const LabelMap& src = mask.labels();
    harvest(src, "original", bank.shapes);
    if (transforms.flips) {
        harvest(flip_horizontal(src), "flip_h", bank.shapes);
        harvest(flip_vertical(src), "flip_v", bank.shapes);
    }
    if (transforms.rotations) {
        LabelMap r = rotate90(src);
        harvest(r, "rot90", bank.shapes);
        r = rotate90(r);
        harvest(r, "rot180", bank.shapes);
        r = rotate90(r);
        harvest(r, "rot270", bank.shapes);
    }
    if (transforms.random_crops > 0) {
        Rng rng(transforms.seed);
        const double lo = std::clamp(transforms.min_crop_fraction, 0.0, 1.0);
        for (int c = 0; c < transforms.random_crops; ++c) {
            const int cw = std::max(1, static_cast<int>(std::lround(mask.width() * rng.uniform(lo, 1.0))));
            const int ch = std::max(1, static_cast<int>(std::lround(mask.height() * rng.uniform(lo, 1.0))));
            const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(mask.width() - cw + 1)));
            const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(mask.height() - ch + 1)));
            harvest(src.block(oy, ox, ch, cw), "crop" + std::to_string(c), bank.shapes);
        }
    }
    if (bank.shapes.empty()) throw Error("build_nucleus_bank: no usable nucleus (all single pixels)");
    return bank;
}

namespace {

// Squared distance along one line (Felzenszwalb & Huttenlocher lower envelope).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(f.size());
    auto parabola = [&](int i) { return f[i] + static_cast<double>(i) * i; };
    auto intersect = [&](int p, int q) { return (parabola(q) - parabola(p)) / (2.0 * (q - p)); };

    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        while (k >= 0 && intersect(v[k], q) <= z[k]) --k;
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -inf : intersect(v[k - 1], q);
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (j < k && z[j + 1] < q) ++j;
        const int p = v[j];
        d[q] = static_cast<double>(q - p) * (q - p) + f[p];
    }
}

}  // namespace

Eigen::ArrayXXd squared_distance_transform(const BinaryMap& occupied) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const Eigen::Index h = occupied.rows(), w = occupied.cols();
    Eigen::ArrayXXd dist(h, w);
    const std::size_t longest = static_cast<std::size_t>(std::max(h, w));
    std::vector<double> f(longest), d(longest), z(longest);
    std::vector<int> v(longest);

    for (Eigen::Index x = 0; x < w; ++x) {
        f.resize(static_cast<std::size_t>(h));
        d.resize(static_cast<std::size_t>(h));
        for (Eigen::Index y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = occupied(y, x) ? 0.0 : inf;
        edt_1d(f, d, v, z);
        for (Eigen::Index y = 0; y < h; ++y) dist(y, x) = d[static_cast<std::size_t>(y)];
    }
    for (Eigen::Index y = 0; y < h; ++y) {
        f.resize(static_cast<std::size_t>(w));
        d.resize(static_cast<std::size_t>(w));
        for (Eigen::Index x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = dist(y, x);
        edt_1d(f, d, v, z);
        for (Eigen::Index x = 0; x < w; ++x) dist(y, x) = d[static_cast<std::size_t>(x)];
    }
    return dist;
}

BinaryMap dilate_disk(const BinaryMap& occupied, int r) {
    if (r < 0) throw Error("dilate_disk: negative radius");
    const Eigen::ArrayXXd dist = squared_distance_transform(occupied);
    return dist <= static_cast<double>(r) * r;
}

void validate(const SynthMaskConfig& cfg) {
    if (cfg.height <= 0 || cfg.width <= 0) throw Error("synthetic mask size must be positive");
    if (cfg.canvas_height < cfg.height || cfg.canvas_width < cfg.width) {
        throw Error("working canvas must be at least the final mask size");
    }
    if (cfg.Q && *cfg.Q < 0) throw Error("placement count Q must be >= 0");
    if (cfg.retry_budget < 1) throw Error("retry budget must be >= 1");
}

int default_placement_count(const NucleusBank& bank, const SynthMaskConfig& cfg, Rng& rng) {
    const double source_area = static_cast<double>(bank.source_width) * bank.source_height;
    const double rho = static_cast<double>(bank.source_instances) *
                       (static_cast<double>(cfg.canvas_width) * cfg.canvas_height / source_area);
    return static_cast<int>(std::lround(rho * rng.uniform(0.8, 1.2)));
}

SynthResult synthesize_mask(const NucleusBank& bank, const SynthMaskConfig& cfg) {
    validate(cfg);
    if (bank.shapes.empty()) throw Error("synthesize_mask: empty nucleus bank");

    Rng rng(cfg.seed);
    SynthResult out;
    out.requested = cfg.Q ? *cfg.Q : default_placement_count(bank, cfg, rng);

    const int H = cfg.canvas_height, W = cfg.canvas_width;
    LabelMap canvas = LabelMap::Zero(H, W);
    BinaryMap occupied = BinaryMap::Constant(H, W, false);

    // Squared distance to the nearest occupied pixel, exact up to the largest
    // dilation radius in the bank; updated locally after each placement.
    int reach = 0;
    for (const auto& e : bank.shapes) reach = std::max(reach, static_cast<int>(std::ceil(e.R)));
    Eigen::ArrayXXd dist = Eigen::ArrayXXd::Constant(H, W, std::numeric_limits<double>::infinity());

    auto touches = [&](const NucleusShape& e, int ox, int oy) {
        for (int y = 0; y < e.height(); ++y) {
            for (int x = 0; x < e.width(); ++x) {
                if (!e.footprint(y, x)) continue;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int cy = oy + y + dy, cx = ox + x + dx;
                        if (cy >= 0 && cx >= 0 && cy < H && cx < W && occupied(cy, cx)) return true;
                    }
                }
            }
        }
        return false;
    };

    std::vector<int> candidates;
    for (int q = 1; q <= out.requested; ++q) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.retry_budget && !placed; ++attempt) {
            const std::size_t pick = static_cast<std::size_t>(rng.below(bank.shapes.size()));
            const NucleusShape& e = bank.shapes[pick];
            const double r = std::ceil(e.R);
            const double r2 = r * r;

            const int ax = static_cast<int>(std::lround(e.cx));
            const int ay = static_cast<int>(std::lround(e.cy));
            candidates.clear();
            for (int py = ay; py <= H - e.height() + ay; ++py) {
                for (int px = ax; px <= W - e.width() + ax; ++px) {
                    if (dist(py, px) > r2) candidates.push_back(py * W + px);
                }
            }
            if (candidates.empty()) continue;
            const int pos = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
            const int ox = pos % W - ax, oy = pos / W - ay;
            if (touches(e, ox, oy)) continue;

            const auto id = static_cast<std::uint32_t>(out.placed + 1);
            for (int y = 0; y < e.height(); ++y) {
                for (int x = 0; x < e.width(); ++x) {
                    if (!e.footprint(y, x)) continue;
                    canvas(oy + y, ox + x) = id;
                    occupied(oy + y, ox + x) = true;
                }
            }
            const int y0 = std::max(0, oy - reach), y1 = std::min(H - 1, oy + e.height() - 1 + reach);
            const int x0 = std::max(0, ox - reach), x1 = std::min(W - 1, ox + e.width() - 1 + reach);
            for (int py = y0; py <= y1; ++py) {
                for (int px = x0; px <= x1; ++px) {
                    double best = dist(py, px);
                    for (int y = 0; y < e.height(); ++y) {
                        const double dy = py - oy - y;
                        if (dy * dy >= best) continue;
                        for (int x = 0; x < e.width(); ++x) {
                            if (!e.footprint(y, x)) continue;
                            const double dx = px - ox - x;
                            best = std::min(best, dx * dx + dy * dy);
                        }
                    }
                    dist(py, px) = best;
                }
            }
            out.placements.push_back(Placement{pick, ox, oy, id});
            ++out.placed;
            placed = true;
        }
        if (!placed) {
            out.warnings.push_back("placement shortfall: stopped after " + std::to_string(out.placed) + " of " +
                                   std::to_string(out.requested) + " nuclei (retry budget " +
                                   std::to_string(cfg.retry_budget) + " exhausted)");
            break;
        }
    }

    out.crop_x = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - cfg.width + 1)));
    out.crop_y = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - cfg.height + 1)));
    out.canvas = InstanceMask(canvas);
    out.mask = canonicalize(InstanceMask(LabelMap(canvas.block(out.crop_y, out.crop_x, cfg.height, cfg.width))));
    return out;
}

std::vector<SynthResult> synthesize_batch(const NucleusBank& bank, const SynthMaskConfig& cfg, int count) {
    if (count < 0) throw Error("mask count must be >= 0");
    std::vector<SynthResult> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), [&](std::size_t i) {
        SynthMaskConfig c = cfg;
        c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        out[i] = synthesize_mask(bank, c);
    });
    return out;
}

}  // namespace nucsel
