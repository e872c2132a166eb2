#pragma once

#include <vector>

#include "attrsim/tensor.hpp"

namespace attrsim {

// One conv + relu stage. Padding is implied as (kernel - 1) / 2, so odd
// kernels keep the grid aligned and stride alone controls downsampling.
struct ConvBlockSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
};

struct BackboneConfig {
    int input_side = 64;
    int in_channels = 3;
    std::vector<ConvBlockSpec> blocks;

    int feature_channels() const;
    // Folds the conv shape law over all blocks.
    int feature_side() const;
    int downsample_factor() const;
    void validate() const;
};

struct ConvBlockParams {
    Tensor kernel; // [out, in, k, k]
    Tensor bias;   // [out]
};

struct BackboneParams {
    BackboneConfig config;
    std::vector<ConvBlockParams> blocks;
};

// [in_channels, side, side] image -> [c, side/ds, side/ds] feature map.
Tensor extract_features(const Tensor& image, const BackboneParams& params);

// Spatial mean per channel: [c,h,w] -> [c]. The plain-pooling baseline and
// the uniform-attention identity both reduce to this.
Tensor mean_pool_features(const Tensor& feature_map);

struct AttributeEmbeddingTable {
    Tensor rows; // [n_attributes, c_a]

    int count() const { return rows.extent(0); }
    int dim() const { return rows.extent(1); }
};

// Row lookup with gradient scatter into that row only.
Tensor embed_attribute(int attribute_id, const AttributeEmbeddingTable& table);

} // namespace attrsim
