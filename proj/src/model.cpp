#include "attrsim/model.hpp"

#include <cmath>
#include <string>

#include "attrsim/errors.hpp"
#include "attrsim/rng.hpp"

namespace attrsim {

void ModelConfig::validate() const {
    if (n_attributes < 1) {
        throw ConfigError("model: n_attributes must be >= 1, got " +
                          std::to_string(n_attributes));
    }
    dims.validate();
    global_backbone.validate();
    local_backbone.validate();
    localization.validate();
    if (global_backbone.feature_channels() != dims.c) {
        throw ConfigError("model: global backbone emits " +
                          std::to_string(global_backbone.feature_channels()) +
                          " channels, expected c=" + std::to_string(dims.c));
    }
    if (local_backbone.feature_channels() != dims.c) {
        throw ConfigError("model: local backbone emits " +
                          std::to_string(local_backbone.feature_channels()) +
                          " channels, expected c=" + std::to_string(dims.c));
    }
    if (localization.local_input_side != local_backbone.input_side) {
        throw ConfigError("model: localization emits side " +
                          std::to_string(localization.local_input_side) +
                          " crops but the local backbone expects " +
                          std::to_string(local_backbone.input_side));
    }
}

ModelConfig ModelConfig::defaults(int n_attributes) {
    ModelConfig cfg;
    cfg.n_attributes = n_attributes;
    cfg.global_backbone.input_side = 64;
    cfg.global_backbone.blocks = {{16, 3, 2}, {32, 3, 2}, {64, 3, 2}};
    cfg.local_backbone.input_side = 32;
    cfg.local_backbone.blocks = {{16, 3, 2}, {32, 3, 2}, {64, 3, 2}};
    cfg.localization.local_input_side = 32;
    return cfg;
}

void Model::validate() const {
    config.validate();
    if (table.rows.shape() != std::vector<int>{config.n_attributes, config.dims.c_a}) {
        throw ShapeError("model: attribute table shape " + shape_str(table.rows.shape()) +
                         " does not match [" + std::to_string(config.n_attributes) + "," +
                         std::to_string(config.dims.c_a) + "]");
    }
    global_branch.validate(table.dim());
    local_branch.validate(table.dim());
}

std::vector<NamedTensor> Model::parameters() const {
    std::vector<NamedTensor> out;
    out.push_back({"attr_table", table.rows});
    global_branch.append_parameters("global", out);
    local_branch.append_parameters("local", out);
    return out;
}

std::vector<NamedTensor> Model::global_parameters() const {
    std::vector<NamedTensor> out;
    out.push_back({"attr_table", table.rows});
    global_branch.append_parameters("global", out);
    return out;
}

std::vector<NamedTensor> Model::local_parameters() const {
    std::vector<NamedTensor> out;
    local_branch.append_parameters("local", out);
    return out;
}

namespace {

Tensor xavier(Rng& rng, std::vector<int> shape, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(fan_in) + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.mutable_data()) {
        v = rng.uniform(-bound, bound);
    }
    t.set_requires_grad(true);
    return t;
}

Tensor zero_bias(int n) {
    Tensor t = Tensor::zeros({n});
    t.set_requires_grad(true);
    return t;
}

BranchParams init_branch(Rng& rng, const EmbedDims& dims, const BackboneConfig& backbone) {
    BranchParams b;
    b.dims = dims;
    b.backbone.config = backbone;
    int in_ch = backbone.in_channels;
    for (const ConvBlockSpec& spec : backbone.blocks) {
        ConvBlockParams block;
        block.kernel = xavier(rng, {spec.out_channels, in_ch, spec.kernel, spec.kernel},
                              in_ch * spec.kernel * spec.kernel,
                              spec.out_channels * spec.kernel * spec.kernel);
        block.bias = zero_bias(spec.out_channels);
        b.backbone.blocks.push_back(block);
        in_ch = spec.out_channels;
    }
    b.spatial.feature_kernel = xavier(rng, {dims.c_1, dims.c, 1, 1}, dims.c, dims.c_1);
    b.spatial.feature_bias = zero_bias(dims.c_1);
    b.spatial.attr_weight = xavier(rng, {dims.c_1, dims.c_a}, dims.c_a, dims.c_1);
    b.channel.attr_weight = xavier(rng, {dims.c_2, dims.c_a}, dims.c_a, dims.c_2);
    const int hidden = dims.c / dims.r;
    b.channel.reduce_weight =
        xavier(rng, {hidden, dims.c_2 + dims.c}, dims.c_2 + dims.c, hidden);
    b.channel.reduce_bias = zero_bias(hidden);
    b.channel.expand_weight = xavier(rng, {dims.c, hidden}, hidden, dims.c);
    b.channel.expand_bias = zero_bias(dims.c);
    b.proj.weight = xavier(rng, {dims.c_o, dims.c}, dims.c, dims.c_o);
    b.proj.bias = zero_bias(dims.c_o);
    return b;
}

} // namespace

Model init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    Model m;
    m.config = config;
    // The table acts as a one-hot(n) -> c_a linear map.
    m.table.rows = xavier(rng, {config.n_attributes, config.dims.c_a}, config.n_attributes,
                          config.dims.c_a);
    m.global_branch = init_branch(rng, config.dims, config.global_backbone);
    m.local_branch = init_branch(rng, config.dims, config.local_backbone);
    m.validate();
    return m;
}

Model clone_model(const Model& model) {
    // The structure copy shares tensor storage; re-point every parameter at
    // fresh storage so the clone is a true snapshot.
    Model copy = model;
    auto rebuild = [](const Tensor& t) {
        Tensor fresh =
            Tensor::from_data(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
        fresh.set_requires_grad(t.requires_grad());
        return fresh;
    };
    copy.table.rows = rebuild(model.table.rows);
    for (BranchParams* branch : {&copy.global_branch, &copy.local_branch}) {
        for (ConvBlockParams& block : branch->backbone.blocks) {
            block.kernel = rebuild(block.kernel);
            block.bias = rebuild(block.bias);
        }
        branch->spatial.feature_kernel = rebuild(branch->spatial.feature_kernel);
        branch->spatial.feature_bias = rebuild(branch->spatial.feature_bias);
        branch->spatial.attr_weight = rebuild(branch->spatial.attr_weight);
        branch->channel.attr_weight = rebuild(branch->channel.attr_weight);
        branch->channel.reduce_weight = rebuild(branch->channel.reduce_weight);
        branch->channel.reduce_bias = rebuild(branch->channel.reduce_bias);
        branch->channel.expand_weight = rebuild(branch->channel.expand_weight);
        branch->channel.expand_bias = rebuild(branch->channel.expand_bias);
        branch->proj.weight = rebuild(branch->proj.weight);
        branch->proj.bias = rebuild(branch->proj.bias);
    }
    return copy;
}

} // namespace attrsim
