#include "attrsim/resample.hpp"

#include <cmath>
#include <cstddef>

#include "attrsim/errors.hpp"

namespace attrsim {

namespace {

void resize_plane(const double* src, int h, int w, double* dst, int oh, int ow) {
    // Align-corners mapping: output corners sample input corners exactly.
    const double ry = oh > 1 ? static_cast<double>(h - 1) / (oh - 1) : 0.0;
    const double rx = ow > 1 ? static_cast<double>(w - 1) / (ow - 1) : 0.0;
    for (int oy = 0; oy < oh; ++oy) {
        double fy = ry * oy;
        int y0 = static_cast<int>(fy);
        if (y0 > h - 2) {
            y0 = h - 2;
        }
        if (y0 < 0) {
            y0 = 0;
        }
        double wy = fy - y0;
        if (h == 1) {
            y0 = 0;
            wy = 0.0;
        }
        const double* row0 = src + static_cast<std::size_t>(y0) * w;
        const double* row1 = src + static_cast<std::size_t>(h == 1 ? 0 : y0 + 1) * w;
        double* out_row = dst + static_cast<std::size_t>(oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
            double fx = rx * ox;
            int x0 = static_cast<int>(fx);
            if (x0 > w - 2) {
                x0 = w - 2;
            }
            if (x0 < 0) {
                x0 = 0;
            }
            double wx = fx - x0;
            if (w == 1) {
                x0 = 0;
                wx = 0.0;
            }
            int x1 = w == 1 ? 0 : x0 + 1;
            double top = row0[x0] * (1.0 - wx) + row0[x1] * wx;
            double bot = row1[x0] * (1.0 - wx) + row1[x1] * wx;
            out_row[ox] = top * (1.0 - wy) + bot * wy;
        }
    }
}

} // namespace

Tensor bilinear_resize(const Tensor& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw ContractError("bilinear_resize: output extents must be >= 1, got " +
                            std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    if (src.ndim() == 2) {
        const int h = src.extent(0);
        const int w = src.extent(1);
        Tensor out = Tensor::zeros({out_h, out_w});
        resize_plane(src.data().data(), h, w, out.mutable_data().data(), out_h, out_w);
        return out;
    }
    if (src.ndim() == 3) {
        const int c = src.extent(0);
        const int h = src.extent(1);
        const int w = src.extent(2);
        Tensor out = Tensor::zeros({c, out_h, out_w});
        const std::size_t in_plane = static_cast<std::size_t>(h) * w;
        const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
        for (int ch = 0; ch < c; ++ch) {
            resize_plane(src.data().data() + ch * in_plane, h, w,
                         out.mutable_data().data() + ch * out_plane, out_h, out_w);
        }
        return out;
    }
    throw ShapeError("bilinear_resize: expected a 2-d map or 3-d image, got " +
                     shape_str(src.shape()));
}

} // namespace attrsim
