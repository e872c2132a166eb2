#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "attrsim/errors.hpp"
#include "attrsim/localization.hpp"
#include "attrsim/oracles.hpp"
#include "attrsim/rng.hpp"
#include "attrsim/tensor.hpp"

using namespace attrsim;

namespace {

BinaryMap map_from(int rows, int cols, const std::vector<int>& bits) {
    BinaryMap m;
    m.rows = rows;
    m.cols = cols;
    m.values.assign(bits.begin(), bits.end());
    return m;
}

// Partition view of regions for comparison against the flood-fill oracle.
std::set<std::set<int>> as_partition(const std::vector<Region>& regions, int cols) {
    std::set<std::set<int>> out;
    for (const Region& r : regions) {
        std::set<int> s;
        for (const Pixel& p : r.pixels) {
            s.insert(p.row * cols + p.col);
        }
        out.insert(std::move(s));
    }
    return out;
}

std::set<std::set<int>> oracle_partition(const std::vector<int>& labels) {
    std::set<std::set<int>> out;
    std::vector<std::set<int>> buckets;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int l = labels[i];
        if (l < 0) {
            continue;
        }
        if (static_cast<std::size_t>(l) >= buckets.size()) {
            buckets.resize(static_cast<std::size_t>(l) + 1);
        }
        buckets[static_cast<std::size_t>(l)].insert(static_cast<int>(i));
    }
    for (auto& b : buckets) {
        if (!b.empty()) {
            out.insert(std::move(b));
        }
    }
    return out;
}

} // namespace

TEST_CASE("binarize: thresholds, degenerate maps, argmax guarantee") {
    Tensor spike = Tensor::from_data({2, 3}, {0, 0, 0, 0, 1.0, 0});
    BinaryMap b = binarize(spike, 0.5);
    CHECK(b.at(1, 1) == 1);
    int set = 0;
    for (auto v : b.values) {
        set += v;
    }
    CHECK(set == 1);

    // Constant and all-zero maps: every pixel qualifies.
    BinaryMap zero = binarize(Tensor::zeros({3, 3}), 0.5);
    for (auto v : zero.values) {
        CHECK(v == 1);
    }
    BinaryMap flat = binarize(Tensor::full({2, 2}, 0.7), 0.9);
    for (auto v : flat.values) {
        CHECK(v == 1);
    }

    // Negative max: threshold exceeds every value, the argmax still wins.
    Tensor neg = Tensor::from_data({1, 3}, {-5.0, -3.0, -9.0});
    BinaryMap nb = binarize(neg, 0.5);
    CHECK(nb.values == std::vector<unsigned char>{0, 1, 0});

    CHECK_THROWS_AS(binarize(spike, 0.0), ContractError);
    CHECK_THROWS_AS(binarize(spike, 1.5), ContractError);
    CHECK_THROWS_AS(binarize(Tensor::zeros({2, 2, 2}), 0.5), ShapeError);
}

TEST_CASE("connected components: connectivity semantics and ordering") {
    // Two diagonal pixels: one region under 8-connectivity, two under 4.
    BinaryMap diag = map_from(2, 2, {1, 0, 0, 1});
    CHECK(connected_components(diag, 8).size() == 1);
    CHECK(connected_components(diag, 4).size() == 2);

    // Ordering: area descending, raster order of the first pixel on ties.
    BinaryMap m = map_from(3, 5,
                           {1, 1, 0, 0, 1,
                            0, 0, 0, 0, 1,
                            1, 0, 0, 0, 1});
    auto regions = connected_components(m, 4);
    REQUIRE(regions.size() == 3);
    CHECK(regions[0].area() == 3); // right column
    CHECK(regions[0].pixels.front().col == 4);
    CHECK(regions[1].area() == 2); // top-left pair
    CHECK(regions[1].pixels.front().row == 0);
    CHECK(regions[2].area() == 1);
    CHECK(regions[2].pixels.front().row == 2);

    CHECK_THROWS_AS(connected_components(m, 6), ContractError);
}

TEST_CASE("connected components agree with the flood-fill oracle") {
    Rng rng(2027);
    for (int it = 0; it < 120; ++it) {
        const int rows = 1 + rng.below(16);
        const int cols = 1 + rng.below(16);
        const double p = 0.2 + 0.5 * rng.uniform();
        const int conn = rng.below(2) == 0 ? 4 : 8;
        BinaryMap m;
        m.rows = rows;
        m.cols = cols;
        m.values.resize(static_cast<std::size_t>(rows) * cols);
        std::vector<unsigned char> grid(m.values.size());
        for (std::size_t i = 0; i < m.values.size(); ++i) {
            m.values[i] = rng.uniform() < p ? 1 : 0;
            grid[i] = m.values[i];
        }

        auto regions = connected_components(m, conn);
        auto labels = floodfill_labels(grid, rows, cols, conn);
        CHECK(as_partition(regions, cols) == oracle_partition(labels));

        // Sorted by area, ties by first-pixel raster position.
        for (std::size_t i = 1; i < regions.size(); ++i) {
            const Region& a = regions[i - 1];
            const Region& b = regions[i];
            const int ra = a.pixels.front().row * cols + a.pixels.front().col;
            const int rb = b.pixels.front().row * cols + b.pixels.front().col;
            CHECK((a.area() > b.area() || (a.area() == b.area() && ra < rb)));
        }

        // Each region's pixels come back in raster order.
        for (const Region& r : regions) {
            for (std::size_t i = 1; i < r.pixels.size(); ++i) {
                const int prev = r.pixels[i - 1].row * cols + r.pixels[i - 1].col;
                const int cur = r.pixels[i].row * cols + r.pixels[i].col;
                CHECK(prev < cur);
            }
        }
    }
}

TEST_CASE("region bbox matches a brute-force scan") {
    Rng rng(77);
    for (int it = 0; it < 60; ++it) {
        int n = 1 + rng.below(30);
        std::vector<Pixel> px;
        int r0 = 1 << 20, c0 = 1 << 20, r1 = -1, c1 = -1;
        for (int i = 0; i < n; ++i) {
            Pixel p{rng.below(20), rng.below(20)};
            px.push_back(p);
            r0 = std::min(r0, p.row);
            c0 = std::min(c0, p.col);
            r1 = std::max(r1, p.row);
            c1 = std::max(c1, p.col);
        }
        BBox box = region_bbox(px);
        CHECK(box.row0 == r0);
        CHECK(box.col0 == c0);
        CHECK(box.row1 == r1);
        CHECK(box.col1 == c1);
    }
    CHECK_THROWS_AS(region_bbox({}), ContractError);
}

TEST_CASE("squarify: worked examples") {
    // Wide box grows symmetrically in rows.
    BBox a = squarify({4, 2, 5, 7}, 10, 1);
    CHECK(a.row0 == 2);
    CHECK(a.row1 == 7);
    CHECK(a.col0 == 2);
    CHECK(a.col1 == 7);

    // Growth would cross the top edge: shift down, never shrink.
    BBox b = squarify({0, 0, 1, 5}, 8, 1);
    CHECK(b.row0 == 0);
    CHECK(b.row1 == 5);
    CHECK(b.col0 == 0);
    CHECK(b.col1 == 5);

    // Odd leftover goes to the high-index side: height 2 -> side 5.
    BBox c = squarify({4, 0, 5, 4}, 12, 1);
    CHECK(c.row0 == 3);
    CHECK(c.row1 == 7);
    CHECK(c.col0 == 0);
    CHECK(c.col1 == 4);

    // min_side dominates a tiny box.
    BBox d = squarify({5, 5, 5, 5}, 16, 8);
    CHECK(d.height() == 8);
    CHECK(d.width() == 8);

    // Side clamps to the image.
    BBox e = squarify({0, 0, 2, 2}, 6, 9);
    CHECK(e.height() == 6);
    CHECK(e.width() == 6);
    CHECK(e.row0 == 0);
    CHECK(e.col0 == 0);

    CHECK_THROWS_AS(squarify({0, 0, 5, 5}, 4, 1), ContractError);
    CHECK_THROWS_AS(squarify({0, 0, 1, 1}, 4, 0), ContractError);
}

TEST_CASE("squarify properties on random boxes") {
    Rng rng(911);
    for (int it = 0; it < 300; ++it) {
        const int side = 4 + rng.below(60);
        int r0 = rng.below(side), r1 = rng.below(side);
        int c0 = rng.below(side), c1 = rng.below(side);
        if (r0 > r1) {
            std::swap(r0, r1);
        }
        if (c0 > c1) {
            std::swap(c0, c1);
        }
        const int min_side = 1 + rng.below(12);
        BBox in{r0, c0, r1, c1};
        BBox out = squarify(in, side, min_side);

        const int want = std::min(std::max({in.height(), in.width(), min_side}), side);
        CHECK(out.square());
        CHECK(out.height() == want);
        CHECK(out.row0 >= 0);
        CHECK(out.col0 >= 0);
        CHECK(out.row1 < side);
        CHECK(out.col1 < side);
        // Contains the input whenever it fits (it always does here).
        CHECK(out.row0 <= in.row0);
        CHECK(out.col0 <= in.col0);
        CHECK(out.row1 >= in.row1);
        CHECK(out.col1 >= in.col1);
    }
}

TEST_CASE("crop_resize: identity, zoom, contracts") {
    Rng rng(13);
    Tensor img = Tensor::zeros({3, 6, 6});
    for (double& v : img.mutable_data()) {
        v = rng.uniform();
    }

    Tensor same = crop_resize(img, {0, 0, 5, 5}, 6);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(same.data()[i] == img.data()[i]);
    }

    Tensor quarter = crop_resize(img, {0, 0, 2, 2}, 3);
    for (int ch = 0; ch < 3; ++ch) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                CHECK(quarter(ch, r, c) == img(ch, r, c));
            }
        }
    }

    CHECK_THROWS_AS(crop_resize(img, {0, 0, 2, 3}, 4), ContractError); // not square
    CHECK_THROWS_AS(crop_resize(img, {4, 4, 6, 6}, 4), ContractError); // out of bounds
    CHECK_THROWS_AS(crop_resize(img, {0, 0, 2, 2}, 0), ContractError);
    CHECK_THROWS_AS(crop_resize(Tensor::zeros({4, 4}), {0, 0, 1, 1}, 2), ShapeError);
}

TEST_CASE("localize: hand-traced corner peak") {
    // alpha = [[1,0],[0,0]] upsampled to 8x8 (align corners) gives
    // v(r,c) = (1 - r/7)(1 - c/7); with tau = 0.5 the set pixels are
    // rows 0..3 at col 0, shrinking to cols 0..2 for rows 1..2, cols 0..3
    // for row 0. Bounding box rows 0..3, cols 0..3: already square.
    Tensor alpha = Tensor::from_data({2, 2}, {1, 0, 0, 0});
    Rng rng(3);
    Tensor img = Tensor::zeros({3, 8, 8});
    for (double& v : img.mutable_data()) {
        v = rng.uniform();
    }
    LocalizationConfig cfg;
    cfg.tau = 0.5;
    cfg.min_side = 2;
    cfg.local_input_side = 4;
    LocalizeResult res = localize(img, alpha, cfg);
    CHECK(res.roi.row0 == 0);
    CHECK(res.roi.col0 == 0);
    CHECK(res.roi.row1 == 3);
    CHECK(res.roi.col1 == 3);
    // 4x4 crop to side 4: exact copy of the top-left quadrant.
    for (int ch = 0; ch < 3; ++ch) {
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                CHECK(res.crop(ch, r, c) == img(ch, r, c));
            }
        }
    }
}

TEST_CASE("localize: constant map covers the full frame") {
    Tensor alpha = Tensor::full({4, 4}, 0.0625);
    Tensor img = Tensor::full({3, 16, 16}, 0.5);
    LocalizationConfig cfg;
    LocalizeResult res = localize(img, alpha, cfg);
    CHECK(res.roi.row0 == 0);
    CHECK(res.roi.col0 == 0);
    CHECK(res.roi.row1 == 15);
    CHECK(res.roi.col1 == 15);
    CHECK(res.crop.shape() == std::vector<int>{3, 32, 32});
}

TEST_CASE("localize: region modes pick the intended blobs") {
    // Map is already at image scale, so the upsample is exact and the blobs
    // stay crisp. Big blob 2x2 at top-left, small 1x1 at bottom-right.
    Tensor alpha = Tensor::zeros({8, 8});
    {
        auto v = alpha.mutable_data();
        v[0 * 8 + 0] = 1.0;
        v[0 * 8 + 1] = 1.0;
        v[1 * 8 + 0] = 1.0;
        v[1 * 8 + 1] = 1.0;
        v[7 * 8 + 7] = 0.9;
    }
    Tensor img = Tensor::full({3, 8, 8}, 0.25);
    LocalizationConfig cfg;
    cfg.tau = 0.85;
    cfg.min_side = 2;
    cfg.local_input_side = 4;

    cfg.region_mode = RegionMode::Top1;
    BBox top1 = localize(img, alpha, cfg).roi;
    CHECK(top1.row0 == 0);
    CHECK(top1.col0 == 0);
    CHECK(top1.row1 == 1);
    CHECK(top1.col1 == 1);

    cfg.region_mode = RegionMode::Top2;
    BBox top2 = localize(img, alpha, cfg).roi;
    CHECK(top2.row0 == 0);
    CHECK(top2.col0 == 0);
    CHECK(top2.row1 == 7);
    CHECK(top2.col1 == 7);

    cfg.region_mode = RegionMode::All;
    BBox all = localize(img, alpha, cfg).roi;
    CHECK(all.row0 == 0);
    CHECK(all.row1 == 7);
}
