#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "shape_oracle.hpp"
#include "nucsel/masksynth.hpp"

using namespace nucsel;
using namespace nucsel::testing;

namespace {

InstanceMask single_disk(int r) {
    InstanceMask m(2 * r + 9, 2 * r + 9);
    stamp_disk(m, r + 4, r + 4, r, 1);
    return m;
}

BinaryMap l_shape() {
    BinaryMap m = BinaryMap::Constant(4, 3, false);
    m(0, 0) = m(1, 0) = m(2, 0) = m(3, 0) = m(3, 1) = m(3, 2) = true;
    m(0, 1) = true;
    return m;
}

/// Exhaustive soundness checks on one synthesized result.
void expect_sound(const SynthResult& r, const NucleusBank& bank, const SynthMaskConfig& cfg) {
    const LabelMap& canvas = r.canvas.labels();
    ASSERT_EQ(canvas.rows(), cfg.canvas_height);
    ASSERT_EQ(canvas.cols(), cfg.canvas_width);
    ASSERT_EQ(static_cast<int>(r.placements.size()), r.placed);

    // Every placement's footprint lands on its own id and nowhere else.
    Eigen::ArrayXXi hits = Eigen::ArrayXXi::Zero(canvas.rows(), canvas.cols());
    for (const auto& p : r.placements) {
        const auto& e = bank.shapes[p.shape];
        for (int y = 0; y < e.height(); ++y) {
            for (int x = 0; x < e.width(); ++x) {
                if (!e.footprint(y, x)) continue;
                ASSERT_GE(p.x + x, 0);
                ASSERT_GE(p.y + y, 0);
                ASSERT_LT(p.x + x, cfg.canvas_width);
                ASSERT_LT(p.y + y, cfg.canvas_height);
                ++hits(p.y + y, p.x + x);
                EXPECT_EQ(canvas(p.y + y, p.x + x), p.id);
            }
        }
    }
    EXPECT_LE(hits.maxCoeff(), 1);
    EXPECT_EQ(static_cast<std::size_t>((canvas > 0u).count()), static_cast<std::size_t>(hits.sum()));
    EXPECT_EQ(touching_pairs(canvas), 0u);
    EXPECT_EQ(touching_pairs(r.mask.labels()), 0u);

    // Canvas instances are congruent to bank shapes.
    const auto fps = instance_footprints(canvas);
    EXPECT_EQ(fps.size(), static_cast<std::size_t>(r.placed));
    for (const auto& [id, g] : fps) {
        bool found = false;
        for (const auto& s : bank.shapes) {
            if (congruent_d4(g, to_grid(s.footprint))) {
                found = true;
                break;
            }
        }
        EXPECT_TRUE(found) << "instance " << id;
    }

    // The output is the canonicalized crop.
    EXPECT_TRUE(r.mask.is_canonical());
    EXPECT_EQ(r.mask.width(), cfg.width);
    EXPECT_EQ(r.mask.height(), cfg.height);
    EXPECT_EQ(r.mask, canonicalize(InstanceMask(LabelMap(canvas.block(r.crop_y, r.crop_x, cfg.height, cfg.width)))));
}

}  // namespace

TEST(Shape, DiskRadiusFiveWithinDiscretizationBounds) {
    const auto bank = build_nucleus_bank(single_disk(5), TransformSet{false, false, 0, 0.5, 0});
    ASSERT_EQ(bank.shapes.size(), 1u);
    const auto& s = bank.shapes[0];
    EXPECT_GE(s.R, 5.0);
    EXPECT_LE(s.R, 5.0 + std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(s.cx, 5.0);
    EXPECT_DOUBLE_EQ(s.cy, 5.0);

    // Brute-force R: farthest foreground pixel having a background 4-neighbour.
    double R = 0;
    const auto g = to_grid(s.footprint);
    const int h = s.height(), w = s.width();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!g[y][x]) continue;
            const bool boundary = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !g[y - 1][x] || !g[y + 1][x] ||
                                  !g[y][x - 1] || !g[y][x + 1];
            if (boundary) R = std::max(R, std::hypot(x - 5.0, y - 5.0));
        }
    }
    EXPECT_DOUBLE_EQ(s.R, R);
}

TEST(Shape, SinglePixelIsSkipped) {
    InstanceMask m(5, 5);
    m(2, 2) = 1;
    EXPECT_THROW(build_nucleus_bank(m, TransformSet{false, false, 0, 0.5, 0}), Error);
    EXPECT_THROW(build_nucleus_bank(InstanceMask(5, 5)), Error);
}

TEST(Bank, OneInstanceFlipsAndRotationsGivesSix) {
    InstanceMask m(10, 10);
    m(2, 2) = m(3, 2) = m(2, 3) = m(2, 4) = 1;
    const auto bank = build_nucleus_bank(m, TransformSet{true, true, 0, 0.5, 0});
    ASSERT_EQ(bank.shapes.size(), 6u);
    const auto original = to_grid(bank.shapes[0].footprint);
    for (const auto& s : bank.shapes) EXPECT_TRUE(congruent_d4(to_grid(s.footprint), original)) << s.origin;
    EXPECT_EQ(bank.source_instances, 1u);
}

TEST(Bank, EveryShapeIsOneComponentWithPositiveRadius) {
    const auto bank = build_nucleus_bank(nuclei_source_mask(), TransformSet{true, true, 6, 0.4, 3});
    EXPECT_GT(bank.shapes.size(), 30u);
    for (const auto& s : bank.shapes) {
        EXPECT_GT(s.R, 0.0);
        // Flood fill from the first foreground pixel reaches every pixel.
        auto g = to_grid(s.footprint);
        std::vector<std::pair<int, int>> stack;
        for (int y = 0; y < s.height() && stack.empty(); ++y) {
            for (int x = 0; x < s.width(); ++x) {
                if (g[y][x]) {
                    stack.push_back({x, y});
                    g[y][x] = false;
                    break;
                }
            }
        }
        std::size_t reached = 0;
        while (!stack.empty()) {
            auto [x, y] = stack.back();
            stack.pop_back();
            ++reached;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx >= 0 && yy >= 0 && xx < s.width() && yy < s.height() && g[yy][xx]) {
                        g[yy][xx] = false;
                        stack.push_back({xx, yy});
                    }
                }
            }
        }
        EXPECT_EQ(reached, s.area()) << s.origin;
    }
}

TEST(Bank, CropsKeepClippedNuclei) {
    InstanceMask m(20, 20);
    stamp_disk(m, 10, 10, 6, 1);
    const auto bank = build_nucleus_bank(m, TransformSet{false, false, 20, 0.3, 5});
    bool partial = false;
    for (const auto& s : bank.shapes) partial |= s.area() < bank.shapes[0].area();
    EXPECT_TRUE(partial);
}

TEST(Transforms, Rot180OfLShapeIsPointwiseReversal) {
    const BinaryMap l = l_shape();
    const BinaryMap r = rotate90(rotate90(l));
    ASSERT_EQ(r.rows(), l.rows());
    ASSERT_EQ(r.cols(), l.cols());
    for (Eigen::Index y = 0; y < l.rows(); ++y) {
        for (Eigen::Index x = 0; x < l.cols(); ++x) EXPECT_EQ(r(y, x), l(l.rows() - 1 - y, l.cols() - 1 - x));
    }
}

TEST(Transforms, DihedralOrbitMatchesOracle) {
    const auto orbit = dihedral_orbit(l_shape());
    const auto base = to_grid(l_shape());
    for (const auto& m : orbit) EXPECT_TRUE(congruent_d4(to_grid(m), base));
    EXPECT_EQ(to_grid(rotate90(l_shape())), rot90_grid(base));

    LabelMap lm(2, 3);
    lm << 1, 2, 3, 4, 5, 6;
    LabelMap fh(2, 3), fv(2, 3);
    fh << 3, 2, 1, 6, 5, 4;
    fv << 4, 5, 6, 1, 2, 3;
    EXPECT_TRUE((flip_horizontal(lm) == fh).all());
    EXPECT_TRUE((flip_vertical(lm) == fv).all());
}

TEST(Dilation, DistanceTransformMatchesBruteForce) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = 3 + static_cast<int>(rng.below(14)), w = 3 + static_cast<int>(rng.below(14));
        BinaryMap occ = BinaryMap::Constant(h, w, false);
        for (int i = 0; i < 1 + static_cast<int>(rng.below(4)); ++i) {
            occ(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(h))),
                static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(w)))) = true;
        }
        const auto dt = squared_distance_transform(occ);
        const int r = static_cast<int>(rng.below(5));
        const BinaryMap dil = dilate_disk(occ, r);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double best = std::numeric_limits<double>::infinity();
                for (int yy = 0; yy < h; ++yy) {
                    for (int xx = 0; xx < w; ++xx) {
                        if (occ(yy, xx)) best = std::min(best, double((x - xx) * (x - xx) + (y - yy) * (y - yy)));
                    }
                }
                EXPECT_EQ(dt(y, x), best);
                EXPECT_EQ(dil(y, x), best <= r * r);
            }
        }
    }
    EXPECT_TRUE(std::isinf(squared_distance_transform(BinaryMap::Constant(3, 3, false))(1, 1)));
}

TEST(Synth, ZeroPlacementsGiveEmptyMask) {
    const auto bank = build_nucleus_bank(nuclei_source_mask());
    SynthMaskConfig cfg;
    cfg.Q = 0;
    cfg.seed = 3;
    const auto r = synthesize_mask(bank, cfg);
    EXPECT_EQ(r.mask.width(), 256);
    EXPECT_EQ(r.mask.height(), 256);
    EXPECT_EQ(r.mask.instance_count(), 0u);
    EXPECT_EQ(r.placed, 0);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Synth, FiveDisksOnLargeCanvas) {
    const auto bank = build_nucleus_bank(single_disk(4), TransformSet{false, false, 0, 0.5, 0});
    SynthMaskConfig cfg;
    cfg.Q = 5;
    cfg.canvas_width = cfg.canvas_height = 200;
    cfg.width = cfg.height = 150;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        cfg.seed = seed;
        const auto r = synthesize_mask(bank, cfg);
        EXPECT_EQ(r.placed, 5);
        EXPECT_EQ(r.canvas.instance_count(), 5u);
        expect_sound(r, bank, cfg);
    }
}

TEST(Synth, SoundAndDeterministic) {
    const auto bank = build_nucleus_bank(nuclei_source_mask(), TransformSet{true, true, 4, 0.5, 1});
    SynthMaskConfig cfg;
    cfg.canvas_width = cfg.canvas_height = 120;
    cfg.width = cfg.height = 96;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        cfg.seed = seed;
        const auto a = synthesize_mask(bank, cfg);
        const auto b = synthesize_mask(bank, cfg);
        EXPECT_EQ(a.canvas, b.canvas);
        EXPECT_EQ(a.mask, b.mask);
        expect_sound(a, bank, cfg);
    }
}

TEST(Synth, PlacementCentersClearOfDilatedOccupancy) {
    const auto bank = build_nucleus_bank(nuclei_source_mask(), TransformSet{true, true, 0, 0.5, 0});
    SynthMaskConfig cfg;
    cfg.canvas_width = cfg.canvas_height = 80;
    cfg.width = cfg.height = 64;
    cfg.Q = 12;
    cfg.seed = 9;
    const auto r = synthesize_mask(bank, cfg);
    for (std::size_t i = 0; i < r.placements.size(); ++i) {
        const auto& p = r.placements[i];
        const auto& e = bank.shapes[p.shape];
        const double px = p.x + std::lround(e.cx), py = p.y + std::lround(e.cy);
        const double rr = std::ceil(e.R);
        for (std::size_t j = 0; j < i; ++j) {
            const auto& q = r.placements[j];
            const auto& f = bank.shapes[q.shape];
            for (int y = 0; y < f.height(); ++y) {
                for (int x = 0; x < f.width(); ++x) {
                    if (f.footprint(y, x)) EXPECT_GT(std::hypot(q.x + x - px, q.y + y - py), rr);
                }
            }
        }
    }
}

TEST(Synth, DenseRequestStopsWithShortfallWarning) {
    const auto bank = build_nucleus_bank(nuclei_source_mask(), TransformSet{false, false, 0, 0.5, 0});
    SynthMaskConfig cfg;
    cfg.canvas_width = cfg.canvas_height = 48;
    cfg.width = cfg.height = 40;
    cfg.Q = 500;
    cfg.seed = 1;
    cfg.retry_budget = 20;
    const auto r = synthesize_mask(bank, cfg);
    EXPECT_LT(r.placed, 500);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("shortfall"), std::string::npos);
    expect_sound(r, bank, cfg);
}

TEST(Synth, CropsCutThroughNuclei) {
    const auto bank = build_nucleus_bank(nuclei_source_mask());
    SynthMaskConfig cfg;
    cfg.canvas_width = cfg.canvas_height = 100;
    cfg.width = cfg.height = 80;
    bool border = false;
    for (const auto& r : synthesize_batch(bank, cfg, 20)) {
        const auto& m = r.mask.labels();
        border |= (m.row(0) > 0u).any() || (m.row(m.rows() - 1) > 0u).any() || (m.col(0) > 0u).any() ||
                  (m.col(m.cols() - 1) > 0u).any();
    }
    EXPECT_TRUE(border);
}

TEST(Synth, DefaultCountFollowsSourceDensity) {
    const auto bank = build_nucleus_bank(nuclei_source_mask());
    SynthMaskConfig cfg;
    const double rho = 5.0 * 320 * 320 / (64.0 * 64.0);
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const int q = default_placement_count(bank, cfg, rng);
        EXPECT_GE(q, std::floor(rho * 0.8));
        EXPECT_LE(q, std::ceil(rho * 1.2));
    }
}

TEST(Synth, BatchUsesDerivedSeeds) {
    const auto bank = build_nucleus_bank(nuclei_source_mask());
    SynthMaskConfig cfg;
    cfg.canvas_width = cfg.canvas_height = 64;
    cfg.width = cfg.height = 48;
    cfg.seed = 77;
    const auto batch = synthesize_batch(bank, cfg, 3);
    SynthMaskConfig one = cfg;
    one.seed = derive_seed(cfg.seed, std::uint64_t{2});
    EXPECT_EQ(batch[2].mask, synthesize_mask(bank, one).mask);
}

TEST(Synth, ConfigValidation) {
    SynthMaskConfig cfg;
    cfg.width = 400;
    EXPECT_THROW(validate(cfg), Error);
    cfg = {};
    cfg.Q = -1;
    EXPECT_THROW(validate(cfg), Error);
    cfg = {};
    cfg.retry_budget = 0;
    EXPECT_THROW(validate(cfg), Error);
    EXPECT_NO_THROW(validate(SynthMaskConfig{}));
}
