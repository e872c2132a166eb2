#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "attrsim/attention.hpp"
#include "attrsim/backbone.hpp"
#include "attrsim/errors.hpp"
#include "attrsim/model.hpp"
#include "attrsim/ops.hpp"
#include "attrsim/oracles.hpp"
#include "attrsim/rng.hpp"
#include "attrsim/tensor.hpp"

using namespace attrsim;

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.mutable_data()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

// Small model used across the gradient and invariant tests.
ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_attributes = 2;
    cfg.dims = {4, 3, 3, 3, 3, 2};
    cfg.global_backbone.input_side = 4;
    cfg.global_backbone.in_channels = 2;
    cfg.global_backbone.blocks = {{4, 3, 2}};
    cfg.local_backbone = cfg.global_backbone;
    cfg.localization.local_input_side = 4;
    cfg.localization.min_side = 2;
    return cfg;
}

} // namespace

TEST_CASE("backbone shape law and config validation") {
    ModelConfig cfg = ModelConfig::defaults(2);
    cfg.validate();
    CHECK(cfg.global_backbone.feature_side() == 8);
    CHECK(cfg.global_backbone.downsample_factor() == 8);
    CHECK(cfg.global_backbone.feature_channels() == 64);
    CHECK(cfg.local_backbone.feature_side() == 4);

    BackboneConfig bad = cfg.global_backbone;
    bad.blocks[1].kernel = 4; // even kernels break grid alignment
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg.global_backbone;
    bad.blocks[0].stride = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg.global_backbone;
    bad.input_side = 50; // 50 -> 25 -> 13 -> 7, not a divisor
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("extract_features: shapes, zero propagation, input checks") {
    Model m = init_model(tiny_config(), 31);
    Rng rng(4);
    Tensor img = rand_tensor(rng, {2, 4, 4}, 0.0, 1.0);
    Tensor fm = extract_features(img, m.global_branch.backbone);
    CHECK(fm.shape() == std::vector<int>{4, 2, 2});

    // Zero image through zero kernels and biases stays exactly zero.
    Model z = m;
    for (ConvBlockParams& b : z.global_branch.backbone.blocks) {
        Tensor zk = Tensor::zeros(b.kernel.shape());
        zk.set_requires_grad(true);
        b.kernel = zk;
        Tensor zb = Tensor::zeros(b.bias.shape());
        zb.set_requires_grad(true);
        b.bias = zb;
    }
    Tensor zero_fm = extract_features(Tensor::zeros({2, 4, 4}), z.global_branch.backbone);
    for (double v : zero_fm.data()) {
        CHECK(v == 0.0);
    }

    CHECK_THROWS_AS(extract_features(Tensor::zeros({2, 5, 5}), m.global_branch.backbone),
                    ShapeError);
    CHECK_THROWS_AS(extract_features(Tensor::zeros({3, 4, 4}), m.global_branch.backbone),
                    ShapeError);
}

TEST_CASE("model init: determinism and xavier bounds") {
    ModelConfig cfg = tiny_config();
    Model a = init_model(cfg, 123);
    Model b = init_model(cfg, 123);
    Model c = init_model(cfg, 124);

    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_diff_c = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        auto da = pa[i].tensor.data();
        auto db = pb[i].tensor.data();
        REQUIRE(da.size() == db.size());
        for (std::size_t j = 0; j < da.size(); ++j) {
            CHECK(da[j] == db[j]);
        }
        auto dc = pc[i].tensor.data();
        for (std::size_t j = 0; j < da.size(); ++j) {
            if (da[j] != dc[j]) {
                any_diff_c = true;
            }
        }
        CHECK(pa[i].tensor.requires_grad());
    }
    CHECK(any_diff_c);

    // Xavier bound for a known tensor: conv kernel [4,2,3,3].
    const double bound = std::sqrt(6.0 / (2 * 9 + 4 * 9));
    for (double v : a.global_branch.backbone.blocks[0].kernel.data()) {
        CHECK(std::abs(v) <= bound);
    }
    // Biases start at zero.
    for (double v : a.global_branch.backbone.blocks[0].bias.data()) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("attribute embedding: lookup, range check, gradient sparsity") {
    Model m = init_model(tiny_config(), 7);
    Tensor row = embed_attribute(1, m.table);
    CHECK(row.shape() == std::vector<int>{3});
    for (int j = 0; j < 3; ++j) {
        CHECK(row(j) == m.table.rows(1, j));
    }
    CHECK_THROWS_AS(embed_attribute(-1, m.table), DomainError);
    CHECK_THROWS_AS(embed_attribute(2, m.table), DomainError);

    // Backward touches only the selected row.
    m.table.rows.clear_grad();
    {
        Tape tape;
        Tensor a = embed_attribute(1, m.table);
        Tensor loss = sum_all(mul(a, a));
        tape.backward(loss);
    }
    auto g = m.table.rows.grad();
    for (int j = 0; j < 3; ++j) {
        CHECK(g[0 * 3 + j] == 0.0);
        CHECK(g[1 * 3 + j] != 0.0);
    }
    m.table.rows.clear_grad();
}

TEST_CASE("mean pooling example and uniform-attention identity") {
    Tensor fm = Tensor::from_data({1, 2, 2}, {0, 2, 4, 6});
    CHECK(mean_pool_features(fm).item() == doctest::Approx(3.0).epsilon(1e-15));

    // Uniform spatial attention reduces the weighted sum to the mean pool.
    Rng rng(9);
    Tensor x = rand_tensor(rng, {3, 4, 5});
    Tensor uniform = Tensor::full({4, 5}, 1.0 / 20.0);
    Tensor weighted = sum_spatial(scale_spatial(x, uniform));
    Tensor mean = mean_pool_features(x);
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(weighted(ch) == doctest::Approx(mean(ch)).epsilon(1e-12));
    }
}

TEST_CASE("spatial attention: normalization, envelope, uniform fallback") {
    Model m = init_model(tiny_config(), 77);
    Rng rng(21);
    for (int it = 0; it < 20; ++it) {
        Tensor img = rand_tensor(rng, {2, 4, 4}, 0.0, 1.0);
        Tensor feats = extract_features(img, m.global_branch.backbone);
        Tensor a = embed_attribute(it % 2, m.table);
        auto sp = spatial_attention(feats, a, m.global_branch.spatial);

        double sum = 0.0;
        for (double v : sp.alpha.data()) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        // Convex combination: pooled value stays inside the per-channel
        // min/max envelope of the feature map.
        for (int ch = 0; ch < 4; ++ch) {
            double lo = 1e300, hi = -1e300;
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 2; ++c) {
                    lo = std::min(lo, feats(ch, r, c));
                    hi = std::max(hi, feats(ch, r, c));
                }
            }
            CHECK(sp.pooled(ch) >= lo - 1e-12);
            CHECK(sp.pooled(ch) <= hi + 1e-12);
        }
    }

    // A zero attribute code kills the logits, leaving a uniform map.
    Tensor img = rand_tensor(rng, {2, 4, 4}, 0.0, 1.0);
    Tensor feats = extract_features(img, m.global_branch.backbone);
    Tensor zero_a = Tensor::zeros({3});
    auto sp = spatial_attention(feats, zero_a, m.global_branch.spatial);
    for (double v : sp.alpha.data()) {
        CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    }
    // And then the pooled vector equals the plain mean pool.
    Tensor mean = mean_pool_features(feats);
    for (int ch = 0; ch < 4; ++ch) {
        CHECK(sp.pooled(ch) == doctest::Approx(mean(ch)).epsilon(1e-12));
    }
}

TEST_CASE("channel attention: gate range, damping, concat order") {
    Model m = init_model(tiny_config(), 55);
    Rng rng(33);
    for (int it = 0; it < 20; ++it) {
        Tensor pooled = rand_tensor(rng, {4}, -2.0, 2.0);
        Tensor a = embed_attribute(it % 2, m.table);
        auto ch = channel_attention(pooled, a, m.global_branch.channel);
        for (int i = 0; i < 4; ++i) {
            CHECK(ch.alpha(i) > 0.0);
            CHECK(ch.alpha(i) < 1.0);
            CHECK(std::abs(ch.gated(i)) <= std::abs(pooled(i)));
            CHECK(ch.gated(i) == doctest::Approx(pooled(i) * ch.alpha(i)).epsilon(1e-12));
        }
    }

    // Concatenation order is (attribute code, pooled): a reduce row that
    // reads only columns [0, c_2) responds to the attribute side alone.
    ChannelHeadParams p;
    p.attr_weight = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    std::vector<double> w(2 * 7, 0.0);
    w[0] = 1.0; // first hidden unit reads q[0] only
    w[7 + 3] = 1.0; // second hidden unit reads pooled[0] only
    p.reduce_weight = Tensor::from_data({2, 7}, w);
    p.reduce_bias = Tensor::zeros({2});
    p.expand_weight = Tensor::from_data({4, 2}, {1, 0, 0, 1, 0, 0, 0, 0});
    p.expand_bias = Tensor::zeros({4});

    Tensor a1 = Tensor::from_data({3}, {0.8, 0.0, 0.0});
    Tensor pooled1 = Tensor::from_data({4}, {0.3, -1.0, 0.5, 0.1});
    Tensor pooled2 = Tensor::from_data({4}, {0.3, 2.0, -0.5, 0.9}); // pooled[0] unchanged
    auto r1 = channel_attention(pooled1, a1, p);
    auto r2 = channel_attention(pooled2, a1, p);
    // alpha[0] depends on q[0] = relu(a[0]) alone.
    CHECK(r1.alpha(0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.8))).epsilon(1e-12));
    CHECK(r2.alpha(0) == r1.alpha(0));
    // alpha[1] reads pooled[0], identical across the two pooled vectors.
    CHECK(r1.alpha(1) == doctest::Approx(1.0 / (1.0 + std::exp(-0.3))).epsilon(1e-12));
    CHECK(r2.alpha(1) == r1.alpha(1));
}

TEST_CASE("projection is the documented affine map") {
    ProjectionParams p;
    p.weight = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    p.bias = Tensor::from_data({2}, {0.5, -0.5});
    Tensor x = Tensor::from_data({3}, {1, 0, -1});
    Tensor f = project_embedding(x, p);
    CHECK(f(0) == doctest::Approx(1 - 3 + 0.5).epsilon(1e-15));
    CHECK(f(1) == doctest::Approx(4 - 6 - 0.5).epsilon(1e-15));
}

TEST_CASE("branch forward: intermediates and construction-time validation") {
    Model m = init_model(tiny_config(), 99);
    Rng rng(3);
    Tensor img = rand_tensor(rng, {2, 4, 4}, 0.0, 1.0);
    BranchOutputs out = branch_forward(img, 0, m.global_branch, m.table);
    CHECK(out.alpha_spatial.shape() == std::vector<int>{2, 2});
    CHECK(out.pooled.shape() == std::vector<int>{4});
    CHECK(out.alpha_channel.shape() == std::vector<int>{4});
    CHECK(out.gated.shape() == std::vector<int>{4});
    CHECK(out.embedding.shape() == std::vector<int>{3});
    for (int i = 0; i < 4; ++i) {
        CHECK(out.gated(i) ==
              doctest::Approx(out.pooled(i) * out.alpha_channel(i)).epsilon(1e-12));
    }

    // A branch with a mis-shaped head fails validation up front.
    Model bad = m;
    bad.global_branch.proj.weight = Tensor::zeros({3, 5});
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    Model bad2 = m;
    bad2.table.rows = Tensor::zeros({2, 4}); // table width no longer c_a
    CHECK_THROWS_AS(bad2.validate(), ShapeError);
}

TEST_CASE("full branch gradient matches finite differences") {
    Model m = init_model(tiny_config(), 2024);
    Rng rng(41);
    Tensor img = rand_tensor(rng, {2, 4, 4}, 0.05, 0.95);
    Tensor probe = rand_tensor(rng, {3});

    auto params = m.global_parameters();
    auto forward = [&] {
        BranchOutputs out = branch_forward(img, 1, m.global_branch, m.table);
        return sum_all(mul(out.embedding, probe));
    };
    auto res = check_gradients(params, forward);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst_coordinate);
    MESSAGE("full branch max rel err: ", res.max_rel_err);
}
