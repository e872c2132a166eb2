#pragma once

#include <span>
#include <vector>

#include "attrsim/tensor.hpp"

namespace attrsim {

// Inclusive pixel bounds.
struct BBox {
    int row0 = 0;
    int col0 = 0;
    int row1 = 0;
    int col1 = 0;

    int height() const { return row1 - row0 + 1; }
    int width() const { return col1 - col0 + 1; }
    bool square() const { return height() == width(); }
};

enum class RegionMode { All, Top1, Top2 };

struct LocalizationConfig {
    double tau = 0.5;          // binarization threshold as a fraction of the map max
    int connectivity = 8;      // 4 or 8
    RegionMode region_mode = RegionMode::All;
    int min_side = 8;          // smallest square side before zooming
    int local_input_side = 32; // crop is resized to this side

    void validate() const;
};

struct BinaryMap {
    int rows = 0;
    int cols = 0;
    std::vector<unsigned char> values;

    unsigned char at(int r, int c) const {
        return values[static_cast<std::size_t>(r) * cols + c];
    }
};

struct Pixel {
    int row = 0;
    int col = 0;
};

struct Region {
    std::vector<Pixel> pixels; // raster order
    int area() const { return static_cast<int>(pixels.size()); }
};

// Marks pixels >= tau * max(map). At least one pixel is always set.
BinaryMap binarize(const Tensor& map2d, double tau);

// Regions sorted by area descending, ties broken by the raster position of
// the region's first pixel. Pixels within a region are in raster order.
std::vector<Region> connected_components(const BinaryMap& map, int connectivity);

BBox region_bbox(std::span<const Pixel> pixels);

// Smallest square of side max(height, width, min_side) that still contains
// the box: the shorter axis grows symmetrically (odd leftover pixel on the
// high-index side), then the square shifts, never shrinks, to fit the image.
// The side is clamped to image_side.
BBox squarify(const BBox& box, int image_side, int min_side);

// Cuts a square region out of a [c,s,s] image and zooms it to out_side.
Tensor crop_resize(const Tensor& image, const BBox& box, int out_side);

struct LocalizeResult {
    Tensor crop;      // [c, local_input_side, local_input_side]
    BBox roi;
    BinaryMap binary; // at image scale
    Tensor upsampled; // attention map at image scale
};

// Full weakly-supervised pipeline: upscale the attention map to the image
// grid, binarize, pick regions per region_mode, box, squarify, crop, zoom.
// Runs entirely off the tape.
LocalizeResult localize(const Tensor& image, const Tensor& alpha_spatial,
                        const LocalizationConfig& cfg);

} // namespace attrsim
