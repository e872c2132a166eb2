#pragma once

#include "attrsim/tensor.hpp"

namespace attrsim {

// Align-corners bilinear resampling for [h,w] maps and [c,h,w] images.
// Not differentiable: never records on a tape, by design. It is used to
// upscale attention maps and to zoom image crops, both outside the gradient
// path.
Tensor bilinear_resize(const Tensor& src, int out_h, int out_w);

} // namespace attrsim
