#pragma once

#include <string>

#include "attrsim/adam.hpp"
#include "attrsim/model.hpp"

namespace attrsim {

// Completed-epoch cursor. stage 0 means untrained, 1 or 2 name the stage the
// checkpoint belongs to, epoch counts finished epochs within that stage.
struct TrainCursor {
    int stage = 0;
    int epoch = 0;
};

struct Checkpoint {
    Model model;
    TrainCursor cursor;
    bool has_optimizer = false;
    AdamState adam_global;
    AdamState adam_local;
};

// Little-endian binary: magic, version, the full model config, the cursor,
// then length-prefixed named parameter blocks and optional optimizer state.
// save -> load -> save is byte-identical.
void save_checkpoint(const Checkpoint& ck, const std::string& path);

// Rebuilds the model from the stored config, then fills every parameter.
// Name or shape mismatches raise CompatibilityError; truncation FormatError.
Checkpoint load_checkpoint(const std::string& path);

} // namespace attrsim
