#pragma once

#include <string>
#include <vector>

#include "attrsim/tensor.hpp"

namespace attrsim {

// Decoded 8-bit pixels, interleaved row-major. channels is 3 for color (P6)
// and 1 for graymaps (P5).
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<unsigned char> pixels;
};

// Binary portable pixmap/graymap only, 8-bit depth. Malformed input raises
// FormatError naming the byte offset.
RawImage read_pnm(const std::string& path);

// [3,h,w] in [0,1] -> P6 bytes, round(clamp(v) * 255).
void save_image(const Tensor& image, const std::string& path);

// [c,h,w] (or [h,w] as one channel) scaled to [0,1].
Tensor decode_image(const RawImage& raw);

// P6 file -> [3,side,side]. A mismatched or non-square source is scaled so
// its short edge equals side (bilinear), then center cropped.
Tensor load_image(const std::string& path, int side);

// [h,w] map -> P5 with per-map min-max normalization (constant maps become
// mid-gray). Already 8-bit-quantized maps spanning [0,1] roundtrip exactly.
void save_attention_map(const Tensor& map2d, const std::string& path);

// P5 file -> [h,w] in [0,1].
Tensor load_attention_map(const std::string& path);

} // namespace attrsim
