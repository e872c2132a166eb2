#include "attrsim/localization.hpp"

#include <algorithm>
#include <string>

#include "attrsim/errors.hpp"
#include "attrsim/resample.hpp"

namespace attrsim {

void LocalizationConfig::validate() const {
    if (!(tau > 0.0) || tau > 1.0) {
        throw ConfigError("localization: tau must be in (0,1], got " + std::to_string(tau));
    }
    if (connectivity != 4 && connectivity != 8) {
        throw ConfigError("localization: connectivity must be 4 or 8, got " +
                          std::to_string(connectivity));
    }
    if (min_side < 1) {
        throw ConfigError("localization: min_side must be >= 1, got " +
                          std::to_string(min_side));
    }
    if (local_input_side < 1) {
        throw ConfigError("localization: local_input_side must be >= 1, got " +
                          std::to_string(local_input_side));
    }
}

BinaryMap binarize(const Tensor& map2d, double tau) {
    if (map2d.ndim() != 2) {
        throw ShapeError("binarize: expected a 2-d map, got " + shape_str(map2d.shape()));
    }
    if (!(tau > 0.0) || tau > 1.0) {
        throw ContractError("binarize: tau must be in (0,1], got " + std::to_string(tau));
    }
    BinaryMap out;
    out.rows = map2d.extent(0);
    out.cols = map2d.extent(1);
    auto values = map2d.data();
    std::size_t argmax = 0;
    double mx = values[0];
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > mx) {
            mx = values[i];
            argmax = i;
        }
    }
    const double threshold = tau * mx;
    out.values.resize(values.size());
    std::size_t set = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        bool on = values[i] >= threshold;
        out.values[i] = on ? 1 : 0;
        set += on;
    }
    // For a map whose max is negative, tau * max lies above the max itself;
    // the argmax still counts as localized.
    if (set == 0) {
        out.values[argmax] = 1;
    }
    return out;
}

std::vector<Region> connected_components(const BinaryMap& map, int connectivity) {
    if (connectivity != 4 && connectivity != 8) {
        throw ContractError("connected_components: connectivity must be 4 or 8, got " +
                            std::to_string(connectivity));
    }
    const int rows = map.rows;
    const int cols = map.cols;
    std::vector<int> label(map.values.size(), -1);
    int next_label = 0;
    std::vector<int> queue;
    for (int start = 0; start < rows * cols; ++start) {
        if (map.values[static_cast<std::size_t>(start)] == 0 ||
            label[static_cast<std::size_t>(start)] != -1) {
            continue;
        }
        label[static_cast<std::size_t>(start)] = next_label;
        queue.assign(1, start);
        std::size_t head = 0;
        while (head < queue.size()) {
            const int at = queue[head++];
            const int r = at / cols;
            const int c = at % cols;
            const int r_lo = std::max(0, r - 1), r_hi = std::min(rows - 1, r + 1);
            const int c_lo = std::max(0, c - 1), c_hi = std::min(cols - 1, c + 1);
            for (int nr = r_lo; nr <= r_hi; ++nr) {
                for (int nc = c_lo; nc <= c_hi; ++nc) {
                    if (nr == r && nc == c) {
                        continue;
                    }
                    if (connectivity == 4 && nr != r && nc != c) {
                        continue;
                    }
                    const int ni = nr * cols + nc;
                    if (map.values[static_cast<std::size_t>(ni)] != 0 &&
                        label[static_cast<std::size_t>(ni)] == -1) {
                        label[static_cast<std::size_t>(ni)] = next_label;
                        queue.push_back(ni);
                    }
                }
            }
        }
        ++next_label;
    }

    // Re-bucket in raster order so each region's pixel list is sorted and
    // the first pixel is its raster-earliest one.
    std::vector<Region> regions(static_cast<std::size_t>(next_label));
    for (int i = 0; i < rows * cols; ++i) {
        int l = label[static_cast<std::size_t>(i)];
        if (l >= 0) {
            regions[static_cast<std::size_t>(l)].pixels.push_back({i / cols, i % cols});
        }
    }
    std::stable_sort(regions.begin(), regions.end(), [cols](const Region& a, const Region& b) {
        if (a.area() != b.area()) {
            return a.area() > b.area();
        }
        const Pixel& pa = a.pixels.front();
        const Pixel& pb = b.pixels.front();
        return pa.row * cols + pa.col < pb.row * cols + pb.col;
    });
    return regions;
}

BBox region_bbox(std::span<const Pixel> pixels) {
    if (pixels.empty()) {
        throw ContractError("region_bbox: empty pixel set");
    }
    BBox box{pixels[0].row, pixels[0].col, pixels[0].row, pixels[0].col};
    for (const Pixel& p : pixels) {
        box.row0 = std::min(box.row0, p.row);
        box.col0 = std::min(box.col0, p.col);
        box.row1 = std::max(box.row1, p.row);
        box.col1 = std::max(box.col1, p.col);
    }
    return box;
}

namespace {

// Grows [lo, hi] to `side` pixels, putting the odd leftover pixel after hi,
// then slides the window into [0, image_side).
void grow_axis(int& lo, int& hi, int side, int image_side) {
    const int grow = side - (hi - lo + 1);
    lo -= grow / 2;
    hi += grow - grow / 2;
    if (lo < 0) {
        hi -= lo;
        lo = 0;
    }
    if (hi >= image_side) {
        lo -= hi - (image_side - 1);
        hi = image_side - 1;
    }
}

} // namespace

BBox squarify(const BBox& box, int image_side, int min_side) {
    if (min_side < 1) {
        throw ContractError("squarify: min_side must be >= 1, got " + std::to_string(min_side));
    }
    if (box.row0 < 0 || box.col0 < 0 || box.row1 >= image_side || box.col1 >= image_side ||
        box.row0 > box.row1 || box.col0 > box.col1) {
        throw ContractError("squarify: box out of bounds for image side " +
                            std::to_string(image_side));
    }
    int side = std::max({box.height(), box.width(), min_side});
    if (side > image_side) {
        side = image_side;
    }
    BBox out = box;
    grow_axis(out.row0, out.row1, side, image_side);
    grow_axis(out.col0, out.col1, side, image_side);
    return out;
}

Tensor crop_resize(const Tensor& image, const BBox& box, int out_side) {
    if (image.ndim() != 3) {
        throw ShapeError("crop_resize: expected a [c,h,w] image, got " +
                         shape_str(image.shape()));
    }
    if (out_side < 1) {
        throw ContractError("crop_resize: out_side must be >= 1, got " +
                            std::to_string(out_side));
    }
    if (!box.square()) {
        throw ContractError("crop_resize: box is not square: " + std::to_string(box.height()) +
                            "x" + std::to_string(box.width()));
    }
    if (box.row0 < 0 || box.col0 < 0 || box.row1 >= image.extent(1) ||
        box.col1 >= image.extent(2)) {
        throw ContractError("crop_resize: box exceeds image bounds");
    }
    const int c = image.extent(0);
    const int w = image.extent(2);
    const int side = box.height();
    Tensor crop = Tensor::zeros({c, side, side});
    {
        const double* src = image.data().data();
        double* dst = crop.mutable_data().data();
        const std::size_t in_plane = static_cast<std::size_t>(image.extent(1)) * w;
        for (int ch = 0; ch < c; ++ch) {
            for (int r = 0; r < side; ++r) {
                const double* row =
                    src + ch * in_plane + static_cast<std::size_t>(box.row0 + r) * w + box.col0;
                double* out_row = dst + (static_cast<std::size_t>(ch) * side + r) * side;
                for (int cc = 0; cc < side; ++cc) {
                    out_row[cc] = row[cc];
                }
            }
        }
    }
    if (side == out_side) {
        return crop;
    }
    return bilinear_resize(crop, out_side, out_side);
}

LocalizeResult localize(const Tensor& image, const Tensor& alpha_spatial,
                        const LocalizationConfig& cfg) {
    cfg.validate();
    if (image.ndim() != 3 || image.extent(1) != image.extent(2)) {
        throw ShapeError("localize: expected a square [c,s,s] image, got " +
                         shape_str(image.shape()));
    }
    const int s = image.extent(1);

    LocalizeResult result;
    result.upsampled = bilinear_resize(alpha_spatial, s, s);
    result.binary = binarize(result.upsampled, cfg.tau);
    std::vector<Region> regions = connected_components(result.binary, cfg.connectivity);

    std::vector<Pixel> selected;
    switch (cfg.region_mode) {
    case RegionMode::All:
        for (const Region& r : regions) {
            selected.insert(selected.end(), r.pixels.begin(), r.pixels.end());
        }
        break;
    case RegionMode::Top1:
        selected = regions.front().pixels;
        break;
    case RegionMode::Top2:
        selected = regions.front().pixels;
        if (regions.size() > 1) {
            selected.insert(selected.end(), regions[1].pixels.begin(), regions[1].pixels.end());
        }
        break;
    }

    result.roi = squarify(region_bbox(selected), s, cfg.min_side);
    result.crop = crop_resize(image, result.roi, cfg.local_input_side);
    return result;
}

} // namespace attrsim
