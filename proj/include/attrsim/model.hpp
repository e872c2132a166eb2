#pragma once

#include <cstdint>
#include <vector>

#include "attrsim/attention.hpp"
#include "attrsim/backbone.hpp"
#include "attrsim/localization.hpp"

namespace attrsim {

// Everything needed to rebuild the two-branch model: global branch on the
// full frame, local branch on the attention-derived crop, one attribute
// table shared by both.
struct ModelConfig {
    int n_attributes = 0;
    EmbedDims dims;
    BackboneConfig global_backbone;
    BackboneConfig local_backbone;
    LocalizationConfig localization;

    void validate() const;
    static ModelConfig defaults(int n_attributes);
};

struct Model {
    ModelConfig config;
    AttributeEmbeddingTable table;
    BranchParams global_branch;
    BranchParams local_branch;

    void validate() const;

    // Deterministic enumeration order: table, global branch, local branch.
    std::vector<NamedTensor> parameters() const;
    // Stage-wise optimizer groups. The shared attribute table trains with
    // the global group in both stages.
    std::vector<NamedTensor> global_parameters() const;
    std::vector<NamedTensor> local_parameters() const;
};

// Xavier-uniform weights (+/- sqrt(6 / (fan_in + fan_out))), zero biases,
// drawn from one seeded stream in parameter enumeration order.
Model init_model(const ModelConfig& config, std::uint64_t seed);

// Deep copy: fresh storage, same values, requires_grad preserved.
Model clone_model(const Model& model);

} // namespace attrsim
