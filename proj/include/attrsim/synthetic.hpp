#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attrsim/dataset.hpp"
#include "attrsim/tensor.hpp"

namespace attrsim {

// Procedural dataset: every image carries one labeled attribute value, drawn
// as a colored, patterned glyph inside that attribute's horizontal band.
// Other bands may hold unlabeled distractor glyphs so that pooling over the
// whole frame is noisy and attention has something to learn.
struct SyntheticSpec {
    std::vector<AttributeDef> attributes; // dense ids, >= 2 values each
    int per_value = 8;                    // images per (attribute, value)
    int side = 64;
    double noise = 0.05;                  // additive pixel noise amplitude

    void validate() const; // ConfigError on violations
};

// Deterministic in (spec, attribute, value, jitter_seed): glyph position,
// distractor choices, and pixel noise all come from jitter_seed.
Tensor render_image(const SyntheticSpec& spec, int attribute, int value,
                    std::uint64_t jitter_seed);

// Renders the full corpus under out_dir/images, writes out_dir/manifest.txt,
// and returns the manifest. Splits are 8:1:1 per (attribute, value) cell
// with a 1:4 query:candidate ratio inside val and test.
DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec,
                                           const std::string& out_dir,
                                           std::uint64_t seed);

} // namespace attrsim
