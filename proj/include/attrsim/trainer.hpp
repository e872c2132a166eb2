#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "attrsim/checkpoint.hpp"
#include "attrsim/config.hpp"
#include "attrsim/dataset.hpp"
#include "attrsim/image_cache.hpp"

namespace attrsim {

struct Triplet {
    int attribute_id = -1;
    int anchor_id = -1;
    int positive_id = -1;
    int negative_id = -1;
};

// count triplets for one attribute: anchor and positive share a value,
// negative differs, all drawn from the split's labeled images. DataError
// when the attribute lacks two distinct values or a two-image value.
std::vector<Triplet> sample_triplets(const DatasetManifest& manifest, int attribute_id,
                                     int count, std::uint64_t seed,
                                     Split split = Split::Train);

// total triplets spread evenly over all attributes (remainder to low ids),
// then shuffled so minibatches mix attributes.
std::vector<Triplet> build_epoch_pool(const DatasetManifest& manifest, int total,
                                      std::uint64_t seed, Split split = Split::Train);

struct EpochStats {
    int epoch = 0; // continuous across stages in the emitted trace
    double l_g = 0.0;
    double l_l = 0.0;
    double l_a = 0.0;
    double joint = 0.0; // all four are per-triplet means
};

enum class StageSelect { Stage1, Stage2, Both };

struct TrainContext {
    const DatasetManifest& manifest;
    ImageCache& images;
    TrainConfig config;
    LossWeights weights;
    bool align_stop_global = false;
    double eval_lambda = 0.6; // stage-2 validation scoring; stage 1 uses 1.0
    int recall_k = 100;
    RecallVariant recall_variant = RecallVariant::AtLeastOne;
    std::string checkpoint_path;              // empty disables disk writes
    std::vector<std::ostream*> trace_sinks;   // CSV rows
    std::ostream* log = nullptr;              // human progress lines
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double best_val_map_stage1 = -1.0; // -1 when the stage did not run or no val split
    double best_val_map_stage2 = -1.0;
    int best_epoch_stage1 = -1;
    int best_epoch_stage2 = -1;
};

// Runs the selected stages on the checkpoint in place, resuming from its
// cursor. Each epoch: sample, train, score the validation split, write the
// checkpoint. At stage end the best-by-validation-MAP snapshot wins (last
// epoch when there is no validation split). Optimizer state starts fresh at
// each stage entry. Non-finite losses abort with the batch index.
TrainReport run_training(Checkpoint& ck, StageSelect select, TrainContext& ctx);

} // namespace attrsim
