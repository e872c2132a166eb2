#pragma once

#include <string>
#include <vector>

#include "attrsim/adam.hpp"
#include "attrsim/backbone.hpp"
#include "attrsim/tensor.hpp"

namespace attrsim {

struct EmbedDims {
    int c = 64;   // feature channels out of the backbone
    int c_a = 32; // attribute embedding width
    int c_1 = 64; // joint space of the spatial head
    int c_2 = 64; // attribute side of the channel head
    int c_o = 64; // output embedding width
    int r = 4;    // bottleneck reduction in the channel head

    void validate() const;
};

// Attribute-conditioned spatial attention. The feature side maps through a
// 1x1 conv (with bias), the attribute side through a plain linear map, both
// squashed by tanh before the per-location dot product.
struct SpatialHeadParams {
    Tensor feature_kernel; // [c_1, c, 1, 1]
    Tensor feature_bias;   // [c_1]
    Tensor attr_weight;    // [c_1, c_a]
};

// Attribute-conditioned channel gate: a two-layer bottleneck over the
// concatenation (attribute code, pooled feature), sigmoid at the end.
// The two linear layers carry biases; the attribute map does not.
struct ChannelHeadParams {
    Tensor attr_weight;   // [c_2, c_a]
    Tensor reduce_weight; // [c/r, c_2 + c]
    Tensor reduce_bias;   // [c/r]
    Tensor expand_weight; // [c, c/r]
    Tensor expand_bias;   // [c]
};

struct ProjectionParams {
    Tensor weight; // [c_o, c]
    Tensor bias;   // [c_o]
};

struct BranchParams {
    EmbedDims dims;
    BackboneParams backbone;
    SpatialHeadParams spatial;
    ChannelHeadParams channel;
    ProjectionParams proj;

    // Construction-time shape checks; ShapeError on any mismatch.
    void validate(int attr_dim) const;
    void append_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct SpatialAttentionResult {
    Tensor alpha;  // [h, w], sums to 1 over the whole grid
    Tensor pooled; // [c], attention-weighted spatial sum
};

SpatialAttentionResult spatial_attention(const Tensor& features, const Tensor& attr_embed,
                                         const SpatialHeadParams& p);

struct ChannelAttentionResult {
    Tensor alpha; // [c], entries strictly in (0,1)
    Tensor gated; // [c], pooled * alpha
};

ChannelAttentionResult channel_attention(const Tensor& pooled, const Tensor& attr_embed,
                                         const ChannelHeadParams& p);

// f = W * gated + b.
Tensor project_embedding(const Tensor& gated, const ProjectionParams& p);

struct BranchOutputs {
    Tensor alpha_spatial; // [h, w]
    Tensor pooled;        // [c]
    Tensor alpha_channel; // [c]
    Tensor gated;         // [c]
    Tensor embedding;     // [c_o]
};

BranchOutputs branch_forward(const Tensor& image, int attribute_id, const BranchParams& params,
                             const AttributeEmbeddingTable& table);

} // namespace attrsim
