#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "attrsim/attention.hpp"
#include "attrsim/localization.hpp"
#include "attrsim/losses.hpp"
#include "attrsim/model.hpp"

namespace attrsim {

// Line-oriented `key = value` file. #-comments and blank lines are skipped;
// duplicate keys are rejected so overrides stay visible.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in);
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

enum class RecallVariant { AtLeastOne, Fraction };

// Optimizer schedules and sampling sizes for the two stages.
struct TrainConfig {
    int epochs_stage1 = 8;
    int epochs_stage2 = 4;
    int batch_size = 16;
    int triplets_per_epoch = 2000;
    double lr_global_s1 = 1e-4;
    double decay_s1 = 0.9;
    int decay_every_s1 = 3;
    double lr_global_s2 = 1e-5;
    double lr_local_s2 = 1e-4;
    double decay_s2 = 0.95;
    std::uint64_t seed = 1;

    void validate() const; // ConfigError on non-positive fields
};

// Every tunable default in one place; the config file overrides fields by
// name and unknown keys are errors.
struct ExperimentConfig {
    int input_side = 64;
    EmbedDims dims;
    LocalizationConfig localization;
    TrainConfig train;
    LossWeights weights;
    bool align_stop_global = false; // cut the alignment gradient into f_g
    double lambda = 0.6;            // fused similarity weight on the global score
    int recall_k = 100;
    RecallVariant recall_variant = RecallVariant::AtLeastOne;

    void validate() const;
};

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);

// Conv stack 16 -> 32 -> dims.c, stride 2 each, on both branches; the local
// branch reads the localization crop side.
ModelConfig model_config_for(const ExperimentConfig& exp, int n_attributes);

} // namespace attrsim
