#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "nucsel/core.hpp"

using namespace nucsel;
using namespace nucsel::testing;

namespace {

std::size_t expected_count(int W, int H, int s, int t) {
    if (W < s || H < s) return 0;
    return static_cast<std::size_t>((W - s) / t + 1) * static_cast<std::size_t>((H - s) / t + 1);
}

}  // namespace

TEST(Crop1, ThousandSquareGives2500Patches) {
    std::vector<ImageRecord> images{solid_image("a", 1000, 1000, 1, 2, 3)};
    const auto r = crop1(images, 256, 15);
    EXPECT_EQ(r.patches.size(), 2500u);
    EXPECT_TRUE(r.warnings.empty());
    EXPECT_EQ(r.patches.back(), (PatchRef{"a", 735, 735, 256}));
}

TEST(Crop1, ExactSizeGivesOnePatch) {
    std::vector<ImageRecord> images{solid_image("a", 256, 256, 0, 0, 0)};
    const auto r = crop1(images, 256, 15);
    ASSERT_EQ(r.patches.size(), 1u);
    EXPECT_EQ(r.patches[0], (PatchRef{"a", 0, 0, 256}));
}

TEST(Crop1, SmallImageWarns) {
    std::vector<ImageRecord> images{solid_image("small", 200, 200, 0, 0, 0)};
    const auto r = crop1(images, 256, 15);
    EXPECT_TRUE(r.patches.empty());
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("small"), std::string::npos);
}

TEST(Crop1, Errors) {
    std::vector<ImageRecord> none;
    EXPECT_THROW(crop1(none, 64, 8), Error);
    std::vector<ImageRecord> one{solid_image("a", 64, 64, 0, 0, 0)};
    EXPECT_THROW(crop1(one, 63, 8), Error);
    EXPECT_THROW(crop1(one, 0, 8), Error);
    EXPECT_THROW(crop1(one, 32, 0), Error);
}

TEST(Crop1, CountFormulaAndBoundsProperty) {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ImageRecord> images;
        std::size_t expected = 0;
        const int s = 2 * (1 + static_cast<int>(rng.below(12)));
        const int t = 1 + static_cast<int>(rng.below(9));
        const int n = 1 + static_cast<int>(rng.below(3));
        for (int i = 0; i < n; ++i) {
            const int W = 1 + static_cast<int>(rng.below(60));
            const int H = 1 + static_cast<int>(rng.below(60));
            images.push_back(ImageRecord("i" + std::to_string(i), W, H));
            expected += expected_count(W, H, s, t);
        }
        const auto r = crop1(images, s, t);
        ASSERT_EQ(r.patches.size(), expected);
        std::set<PatchRef> unique(r.patches.begin(), r.patches.end());
        EXPECT_EQ(unique.size(), r.patches.size());
        for (const auto& p : r.patches) {
            const auto& img = find_image(images, p.image_id);
            EXPECT_GE(p.x, 0);
            EXPECT_GE(p.y, 0);
            EXPECT_LE(p.x, img.width - s);
            EXPECT_LE(p.y, img.height - s);
            EXPECT_EQ(p.x % t, 0);
            EXPECT_EQ(p.y % t, 0);
        }
    }
}

TEST(Crop1, RowMajorOrderPerImage) {
    std::vector<ImageRecord> images{ImageRecord("b", 8, 6), ImageRecord("a", 6, 6)};
    const auto r = crop1(images, 4, 2);
    const std::vector<PatchRef> expected{{"b", 0, 0, 4}, {"b", 2, 0, 4}, {"b", 4, 0, 4}, {"b", 0, 2, 4},
                                         {"b", 2, 2, 4}, {"b", 4, 2, 4}, {"a", 0, 0, 4}, {"a", 2, 0, 4},
                                         {"a", 0, 2, 4}, {"a", 2, 2, 4}};
    EXPECT_EQ(r.patches, expected);
}

TEST(Crop2, QuadrantPositions) {
    const auto q = crop2(PatchRef{"img", 0, 0, 256});
    const int xs[] = {0, 128, 0, 128}, ys[] = {0, 0, 128, 128};
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(q[i].side(), 128);
        EXPECT_EQ(q[i].x(), xs[i]);
        EXPECT_EQ(q[i].y(), ys[i]);
        EXPECT_EQ(q[i].quadrant, kQuadrants[i]);
    }
}

TEST(Crop2, QuadrantsTileThePatch) {
    for (int s : {2, 4, 10, 64}) {
        const PatchRef p{"img", 3, 5, s};
        std::vector<int> cover(static_cast<std::size_t>(s * s), 0);
        for (const auto& q : crop2(p)) {
            for (int y = q.y(); y < q.y() + q.side(); ++y) {
                for (int x = q.x(); x < q.x() + q.side(); ++x) ++cover[static_cast<std::size_t>((y - p.y) * s + (x - p.x))];
            }
        }
        for (int c : cover) EXPECT_EQ(c, 1);
    }
}

TEST(Crop2, FourByFourDistinctPixels) {
    ImageRecord img("img", 4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            auto* p = img.pixel(x, y);
            p[0] = static_cast<std::uint8_t>(y * 4 + x), p[1] = 0, p[2] = 0;
        }
    }
    const auto q = crop2(PatchRef{"img", 0, 0, 4});
    const int expected[4][4] = {{0, 1, 4, 5}, {2, 3, 6, 7}, {8, 9, 12, 13}, {10, 11, 14, 15}};
    for (int i = 0; i < 4; ++i) {
        const ImageView v = img.view(q[i].x(), q[i].y(), q[i].side(), q[i].side());
        EXPECT_EQ(v.pixel(0, 0)[0], expected[i][0]);
        EXPECT_EQ(v.pixel(1, 0)[0], expected[i][1]);
        EXPECT_EQ(v.pixel(0, 1)[0], expected[i][2]);
        EXPECT_EQ(v.pixel(1, 1)[0], expected[i][3]);
    }
}

TEST(Crop2, ReassemblyIsBitIdentical) {
    const ImageRecord img = texture_image("img", 40, 40, 2, 3);
    const PatchRef p{"img", 6, 10, 24};
    ImageRecord rebuilt("r", 24, 24);
    for (const auto& q : crop2(p)) {
        const ImageView v = img.view(q.x(), q.y(), q.side(), q.side());
        for (int y = 0; y < q.side(); ++y) {
            for (int x = 0; x < q.side(); ++x) {
                std::copy_n(v.pixel(x, y), 3, rebuilt.pixel(q.x() - p.x + x, q.y() - p.y + y));
            }
        }
    }
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 24; ++x) {
            for (int c = 0; c < 3; ++c) EXPECT_EQ(rebuilt.pixel(x, y)[c], img.pixel(p.x + x, p.y + y)[c]);
        }
    }
}

TEST(Keys, PatchAndSubRegion) {
    const PatchRef p{"slide_1", 15, 30, 256};
    EXPECT_EQ(feature_key(p), "slide_1@15,30,256");
    EXPECT_EQ(feature_key(crop2(p)[3]), "slide_1@15,30,256#BR");
}

TEST(ImageView, OutsideThrows) {
    const ImageRecord img("a", 10, 10);
    EXPECT_THROW(img.view(5, 5, 6, 2), Error);
    EXPECT_THROW(img.view(-1, 0, 2, 2), Error);
    EXPECT_NO_THROW(img.view(5, 5, 5, 5));
}

TEST(Corpus, PngRoundTripAndManifest) {
    TempDir dir;
    const ImageRecord img = texture_image("x", 17, 9, 1, 4);
    save_image_png(img, dir / "x.png");
    const ImageRecord back = load_image_png(dir / "x.png", "x");
    EXPECT_EQ(back.width, 17);
    EXPECT_EQ(back.height, 9);
    EXPECT_EQ(back.rgb, img.rgb);

    fs::create_directories(dir / "sub");
    std::vector<CorpusEntry> entries{{"x", "x.png"}};
    write_corpus_manifest(entries, dir / "manifest.json");
    const auto corpus = load_corpus(dir / "manifest.json");
    ASSERT_EQ(corpus.size(), 1u);
    EXPECT_EQ(corpus[0].id, "x");
    EXPECT_EQ(corpus[0].rgb, img.rgb);
}

TEST(Corpus, DuplicateIdsRejected) {
    TempDir dir;
    std::ofstream(dir / "m.json") << R"([{"id":"a","path":"a.png"},{"id":"a","path":"b.png"}])";
    EXPECT_THROW(read_corpus_manifest(dir / "m.json"), Error);
}

TEST(Corpus, GrayscaleReplicated) {
    TempDir dir;
    InstanceMask m(3, 2);
    m(0, 0) = 200 << 8;
    m(2, 1) = 7 << 8;
    save_mask(m, dir / "g.png");
    const ImageRecord img = load_image_png(dir / "g.png", "g");
    EXPECT_EQ(img.pixel(0, 0)[0], 200);
    EXPECT_EQ(img.pixel(0, 0)[2], 200);
    EXPECT_EQ(img.pixel(2, 1)[1], 7);
}

TEST(Corpus, NotAPng) {
    TempDir dir;
    std::ofstream(dir / "bad.png") << "definitely not a png";
    EXPECT_THROW(load_image_png(dir / "bad.png", "bad"), Error);
}

TEST(Rng, BelowIsInRangeAndSeeded) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const auto v = a.below(7);
        EXPECT_LT(v, 7u);
        EXPECT_EQ(v, b.below(7));
    }
    EXPECT_NE(derive_seed(1, "cluster"), derive_seed(1, "synth"));
    EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
}

TEST(ParallelFor, EachIndexOnceAndRethrows) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 3) throw Error("boom");
                 }),
                 Error);
}
