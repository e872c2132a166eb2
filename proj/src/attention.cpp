#include "attrsim/attention.hpp"

#include <cmath>

#include "attrsim/errors.hpp"
#include "attrsim/ops.hpp"

namespace attrsim {

void EmbedDims::validate() const {
    if (c < 1 || c_a < 1 || c_1 < 1 || c_2 < 1 || c_o < 1 || r < 1) {
        throw ConfigError("embedding dims must all be positive");
    }
    if (c % r != 0) {
        throw ConfigError("channel head reduction r=" + std::to_string(r) +
                          " must divide c=" + std::to_string(c));
    }
}

namespace {

void expect_shape(const char* what, const Tensor& t, const std::vector<int>& want) {
    if (t.shape() != want) {
        throw ShapeError(std::string(what) + ": expected " +
                         shape_str(std::span<const int>(want.data(), want.size())) + ", got " +
                         shape_str(t.shape()));
    }
}

} // namespace

void BranchParams::validate(int attr_dim) const {
    dims.validate();
    backbone.config.validate();
    if (attr_dim != dims.c_a) {
        throw ShapeError("branch: attribute table width " + std::to_string(attr_dim) +
                         " does not match c_a=" + std::to_string(dims.c_a));
    }
    if (backbone.config.feature_channels() != dims.c) {
        throw ShapeError("branch: backbone emits " +
                         std::to_string(backbone.config.feature_channels()) +
                         " channels but c=" + std::to_string(dims.c));
    }
    if (backbone.blocks.size() != backbone.config.blocks.size()) {
        throw ShapeError("branch: backbone parameter count does not match its config");
    }
    int in_ch = backbone.config.in_channels;
    for (std::size_t i = 0; i < backbone.blocks.size(); ++i) {
        const ConvBlockSpec& spec = backbone.config.blocks[i];
        expect_shape("backbone kernel", backbone.blocks[i].kernel,
                     {spec.out_channels, in_ch, spec.kernel, spec.kernel});
        expect_shape("backbone bias", backbone.blocks[i].bias, {spec.out_channels});
        in_ch = spec.out_channels;
    }
    expect_shape("spatial feature kernel", spatial.feature_kernel, {dims.c_1, dims.c, 1, 1});
    expect_shape("spatial feature bias", spatial.feature_bias, {dims.c_1});
    expect_shape("spatial attr weight", spatial.attr_weight, {dims.c_1, dims.c_a});
    expect_shape("channel attr weight", channel.attr_weight, {dims.c_2, dims.c_a});
    expect_shape("channel reduce weight", channel.reduce_weight,
                 {dims.c / dims.r, dims.c_2 + dims.c});
    expect_shape("channel reduce bias", channel.reduce_bias, {dims.c / dims.r});
    expect_shape("channel expand weight", channel.expand_weight, {dims.c, dims.c / dims.r});
    expect_shape("channel expand bias", channel.expand_bias, {dims.c});
    expect_shape("projection weight", proj.weight, {dims.c_o, dims.c});
    expect_shape("projection bias", proj.bias, {dims.c_o});
}

void BranchParams::append_parameters(const std::string& prefix,
                                     std::vector<NamedTensor>& out) const {
    for (std::size_t i = 0; i < backbone.blocks.size(); ++i) {
        const std::string base = prefix + ".backbone.b" + std::to_string(i);
        out.push_back({base + ".kernel", backbone.blocks[i].kernel});
        out.push_back({base + ".bias", backbone.blocks[i].bias});
    }
    out.push_back({prefix + ".spatial.feature_kernel", spatial.feature_kernel});
    out.push_back({prefix + ".spatial.feature_bias", spatial.feature_bias});
    out.push_back({prefix + ".spatial.attr_weight", spatial.attr_weight});
    out.push_back({prefix + ".channel.attr_weight", channel.attr_weight});
    out.push_back({prefix + ".channel.reduce_weight", channel.reduce_weight});
    out.push_back({prefix + ".channel.reduce_bias", channel.reduce_bias});
    out.push_back({prefix + ".channel.expand_weight", channel.expand_weight});
    out.push_back({prefix + ".channel.expand_bias", channel.expand_bias});
    out.push_back({prefix + ".proj.weight", proj.weight});
    out.push_back({prefix + ".proj.bias", proj.bias});
}

SpatialAttentionResult spatial_attention(const Tensor& features, const Tensor& attr_embed,
                                         const SpatialHeadParams& p) {
    if (features.ndim() != 3) {
        throw ShapeError("spatial_attention: expected [c,h,w] features, got " +
                         shape_str(features.shape()));
    }
    const int c1 = p.feature_kernel.extent(0);
    const int h = features.extent(1);
    const int w = features.extent(2);

    Tensor px = activation(
        add_channel_bias(conv2d(features, p.feature_kernel, 1, 0), p.feature_bias),
        Activation::Tanh);
    Tensor pa = activation(matvec(p.attr_weight, attr_embed), Activation::Tanh);

    // Per-location dot product against the (spatially duplicated) attribute
    // code, scaled by 1/sqrt(c_1), then one softmax over all h*w positions.
    Tensor logits =
        mul_scalar(sum_channels(scale_channels(px, pa)), 1.0 / std::sqrt(static_cast<double>(c1)));
    Tensor alpha = reshape(softmax(reshape(logits, {h * w}), 0), {h, w});

    SpatialAttentionResult out;
    out.alpha = alpha;
    out.pooled = sum_spatial(scale_spatial(features, alpha));
    return out;
}

ChannelAttentionResult channel_attention(const Tensor& pooled, const Tensor& attr_embed,
                                         const ChannelHeadParams& p) {
    Tensor q = activation(matvec(p.attr_weight, attr_embed), Activation::Relu);
    // Concatenation order is (attribute code, pooled feature).
    Tensor joint = concat(q, pooled);
    Tensor hidden =
        activation(add(matvec(p.reduce_weight, joint), p.reduce_bias), Activation::Relu);
    Tensor alpha =
        activation(add(matvec(p.expand_weight, hidden), p.expand_bias), Activation::Sigmoid);

    ChannelAttentionResult out;
    out.alpha = alpha;
    out.gated = mul(pooled, alpha);
    return out;
}

Tensor project_embedding(const Tensor& gated, const ProjectionParams& p) {
    return add(matvec(p.weight, gated), p.bias);
}

BranchOutputs branch_forward(const Tensor& image, int attribute_id, const BranchParams& params,
                             const AttributeEmbeddingTable& table) {
    Tensor a = embed_attribute(attribute_id, table);
    Tensor features = extract_features(image, params.backbone);
    SpatialAttentionResult sp = spatial_attention(features, a, params.spatial);
    ChannelAttentionResult ch = channel_attention(sp.pooled, a, params.channel);

    BranchOutputs out;
    out.alpha_spatial = sp.alpha;
    out.pooled = sp.pooled;
    out.alpha_channel = ch.alpha;
    out.gated = ch.gated;
    out.embedding = project_embedding(ch.gated, params.proj);
    return out;
}

} // namespace attrsim
