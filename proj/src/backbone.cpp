#include "attrsim/backbone.hpp"

#include <string>

#include "attrsim/errors.hpp"
#include "attrsim/ops.hpp"

namespace attrsim {

int BackboneConfig::feature_channels() const {
    if (blocks.empty()) {
        throw ConfigError("backbone: at least one block is required");
    }
    return blocks.back().out_channels;
}

int BackboneConfig::feature_side() const {
    int side = input_side;
    for (const ConvBlockSpec& b : blocks) {
        const int pad = (b.kernel - 1) / 2;
        side = (side + 2 * pad - b.kernel) / b.stride + 1;
    }
    return side;
}

int BackboneConfig::downsample_factor() const {
    return input_side / feature_side();
}

void BackboneConfig::validate() const {
    if (input_side < 1) {
        throw ConfigError("backbone: input_side must be >= 1, got " +
                          std::to_string(input_side));
    }
    if (in_channels < 1) {
        throw ConfigError("backbone: in_channels must be >= 1");
    }
    if (blocks.empty()) {
        throw ConfigError("backbone: at least one block is required");
    }
    int side = input_side;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const ConvBlockSpec& b = blocks[i];
        if (b.out_channels < 1) {
            throw ConfigError("backbone block " + std::to_string(i) +
                              ": out_channels must be >= 1");
        }
        if (b.kernel < 1 || b.kernel % 2 == 0) {
            throw ConfigError("backbone block " + std::to_string(i) +
                              ": kernel must be odd and >= 1, got " + std::to_string(b.kernel));
        }
        if (b.stride < 1) {
            throw ConfigError("backbone block " + std::to_string(i) + ": stride must be >= 1");
        }
        const int pad = (b.kernel - 1) / 2;
        side = (side + 2 * pad - b.kernel) / b.stride + 1;
        if (side < 1) {
            throw ConfigError("backbone block " + std::to_string(i) +
                              " shrinks the grid below 1 pixel");
        }
    }
    if (input_side % side != 0) {
        throw ConfigError("backbone: input_side " + std::to_string(input_side) +
                          " is not an integer multiple of the feature side " +
                          std::to_string(side));
    }
}

Tensor extract_features(const Tensor& image, const BackboneParams& params) {
    const BackboneConfig& cfg = params.config;
    if (image.ndim() != 3 || image.extent(0) != cfg.in_channels ||
        image.extent(1) != cfg.input_side || image.extent(2) != cfg.input_side) {
        throw ShapeError("extract_features: expected [" + std::to_string(cfg.in_channels) +
                         "," + std::to_string(cfg.input_side) + "," +
                         std::to_string(cfg.input_side) + "], got " + shape_str(image.shape()));
    }
    if (params.blocks.size() != cfg.blocks.size()) {
        throw ContractError("extract_features: parameter blocks do not match the config");
    }
    Tensor x = image;
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        const ConvBlockSpec& spec = cfg.blocks[i];
        const int pad = (spec.kernel - 1) / 2;
        x = conv2d(x, params.blocks[i].kernel, spec.stride, pad);
        x = add_channel_bias(x, params.blocks[i].bias);
        x = activation(x, Activation::Relu);
    }
    return x;
}

Tensor mean_pool_features(const Tensor& feature_map) {
    if (feature_map.ndim() != 3) {
        throw ShapeError("mean_pool_features: expected [c,h,w], got " +
                         shape_str(feature_map.shape()));
    }
    const double inv = 1.0 / (static_cast<double>(feature_map.extent(1)) *
                              static_cast<double>(feature_map.extent(2)));
    return mul_scalar(sum_spatial(feature_map), inv);
}

Tensor embed_attribute(int attribute_id, const AttributeEmbeddingTable& table) {
    if (attribute_id < 0 || attribute_id >= table.count()) {
        throw DomainError("embed_attribute: attribute id " + std::to_string(attribute_id) +
                          " out of range [0," + std::to_string(table.count()) + ")");
    }
    return select_row(table.rows, attribute_id);
}

} // namespace attrsim
