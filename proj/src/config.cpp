#include "attrsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "attrsim/errors.hpp"

namespace attrsim {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* kind) {
    throw ConfigError("key '" + key + "': '" + value + "' is not a " + kind);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "input_side", "c", "c_a", "c_1", "c_2", "c_o", "r",
        "tau", "connectivity", "region_mode", "min_side", "local_input_side",
        "epochs_stage1", "epochs_stage2", "batch_size", "triplets_per_epoch",
        "lr_global_s1", "decay_s1", "decay_every_s1",
        "lr_global_s2", "lr_local_s2", "decay_s2", "seed",
        "alpha", "beta", "gamma", "margin",
        "align_stop_global", "lambda", "recall_k", "recall_variant",
    };
    return keys;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            std::ostringstream msg;
            msg << "config line " << line_no << ": expected key = value";
            throw ConfigError(msg.str());
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            std::ostringstream msg;
            msg << "config line " << line_no << ": empty key";
            throw ConfigError(msg.str());
        }
        if (!cfg.values_.emplace(key, value).second) {
            throw ConfigError("config key '" + key + "' set twice");
        }
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path + "'");
    }
    return parse(in);
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(it->second, &used);
    } catch (const std::exception&) {
        bad_value(key, it->second, "number");
    }
    if (used != it->second.size()) {
        bad_value(key, it->second, "number");
    }
    return v;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(it->second, &used);
    } catch (const std::exception&) {
        bad_value(key, it->second, "integer");
    }
    if (used != it->second.size()) {
        bad_value(key, it->second, "integer");
    }
    return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(it->second, &used);
    } catch (const std::exception&) {
        bad_value(key, it->second, "non-negative integer");
    }
    if (used != it->second.size()) {
        bad_value(key, it->second, "non-negative integer");
    }
    return static_cast<std::uint64_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    const std::string& v = it->second;
    if (v == "true" || v == "1") {
        return true;
    }
    if (v == "false" || v == "0") {
        return false;
    }
    bad_value(key, v, "boolean (true/false/1/0)");
}

void TrainConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0)) {
            throw ConfigError(std::string(name) + " must be positive");
        }
    };
    positive(epochs_stage1, "epochs_stage1");
    positive(epochs_stage2, "epochs_stage2");
    positive(batch_size, "batch_size");
    positive(triplets_per_epoch, "triplets_per_epoch");
    positive(lr_global_s1, "lr_global_s1");
    positive(decay_s1, "decay_s1");
    positive(decay_every_s1, "decay_every_s1");
    positive(lr_global_s2, "lr_global_s2");
    positive(lr_local_s2, "lr_local_s2");
    positive(decay_s2, "decay_s2");
}

void ExperimentConfig::validate() const {
    dims.validate();
    localization.validate();
    train.validate();
    if (input_side < 8) {
        throw ConfigError("input_side must be at least 8");
    }
    if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0) {
        throw ConfigError("loss weights must be non-negative");
    }
    if (lambda < 0.0 || lambda > 1.0) {
        throw ConfigError("lambda must lie in [0,1]");
    }
    if (recall_k < 1) {
        throw ConfigError("recall_k must be positive");
    }
}

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv) {
    for (const auto& [key, value] : kv.entries()) {
        (void)value;
        if (known_keys().count(key) == 0) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }

    ExperimentConfig e;
    e.input_side = kv.get_int("input_side", e.input_side);
    e.dims.c = kv.get_int("c", e.dims.c);
    e.dims.c_a = kv.get_int("c_a", e.dims.c_a);
    e.dims.c_1 = kv.get_int("c_1", e.dims.c_1);
    e.dims.c_2 = kv.get_int("c_2", e.dims.c_2);
    e.dims.c_o = kv.get_int("c_o", e.dims.c_o);
    e.dims.r = kv.get_int("r", e.dims.r);
    e.localization.tau = kv.get_double("tau", e.localization.tau);
    e.localization.connectivity = kv.get_int("connectivity", e.localization.connectivity);
    const std::string mode = kv.get_string("region_mode", "all");
    if (mode == "all") {
        e.localization.region_mode = RegionMode::All;
    } else if (mode == "top1") {
        e.localization.region_mode = RegionMode::Top1;
    } else if (mode == "top2") {
        e.localization.region_mode = RegionMode::Top2;
    } else {
        throw ConfigError("region_mode must be all, top1, or top2");
    }
    e.localization.min_side = kv.get_int("min_side", e.localization.min_side);
    e.localization.local_input_side =
        kv.get_int("local_input_side", e.localization.local_input_side);

    e.train.epochs_stage1 = kv.get_int("epochs_stage1", e.train.epochs_stage1);
    e.train.epochs_stage2 = kv.get_int("epochs_stage2", e.train.epochs_stage2);
    e.train.batch_size = kv.get_int("batch_size", e.train.batch_size);
    e.train.triplets_per_epoch = kv.get_int("triplets_per_epoch", e.train.triplets_per_epoch);
    e.train.lr_global_s1 = kv.get_double("lr_global_s1", e.train.lr_global_s1);
    e.train.decay_s1 = kv.get_double("decay_s1", e.train.decay_s1);
    e.train.decay_every_s1 = kv.get_int("decay_every_s1", e.train.decay_every_s1);
    e.train.lr_global_s2 = kv.get_double("lr_global_s2", e.train.lr_global_s2);
    e.train.lr_local_s2 = kv.get_double("lr_local_s2", e.train.lr_local_s2);
    e.train.decay_s2 = kv.get_double("decay_s2", e.train.decay_s2);
    e.train.seed = kv.get_u64("seed", e.train.seed);

    e.weights.alpha = kv.get_double("alpha", e.weights.alpha);
    e.weights.beta = kv.get_double("beta", e.weights.beta);
    e.weights.gamma = kv.get_double("gamma", e.weights.gamma);
    e.weights.margin = kv.get_double("margin", e.weights.margin);

    e.align_stop_global = kv.get_bool("align_stop_global", e.align_stop_global);
    e.lambda = kv.get_double("lambda", e.lambda);
    e.recall_k = kv.get_int("recall_k", e.recall_k);
    const std::string variant = kv.get_string("recall_variant", "at_least_one");
    if (variant == "at_least_one") {
        e.recall_variant = RecallVariant::AtLeastOne;
    } else if (variant == "fraction") {
        e.recall_variant = RecallVariant::Fraction;
    } else {
        throw ConfigError("recall_variant must be at_least_one or fraction");
    }

    e.validate();
    return e;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(KeyValueConfig::load(path));
}

ModelConfig model_config_for(const ExperimentConfig& exp, int n_attributes) {
    ModelConfig mc;
    mc.n_attributes = n_attributes;
    mc.dims = exp.dims;
    mc.localization = exp.localization;
    mc.global_backbone.input_side = exp.input_side;
    mc.global_backbone.in_channels = 3;
    mc.global_backbone.blocks = {{16, 3, 2}, {32, 3, 2}, {exp.dims.c, 3, 2}};
    mc.local_backbone = mc.global_backbone;
    mc.local_backbone.input_side = exp.localization.local_input_side;
    mc.validate();
    return mc;
}

} // namespace attrsim
