#pragma once

#include <vector>

#include "attrsim/tensor.hpp"

namespace attrsim {

// Differentiable ops. Each op validates shapes, computes its result, and, if
// a tape is active and any input is tracked, records one backward closure
// that accumulates into the tracked inputs' gradient buffers.

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// [m,k] x [k] -> [m]
Tensor matvec(const Tensor& m, const Tensor& v);

// input [c_in,h,w], kernels [c_out,c_in,k,k], square kernel, zero padding.
// Output spatial side: (h + 2*padding - k) / stride + 1, floored.
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int padding);

// x [c,h,w] + bias [c] broadcast over the spatial grid.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

enum class Activation { Tanh, Relu, Sigmoid };

Tensor activation(const Tensor& x, Activation kind);

// Max-shifted softmax along one axis; every slice sums to 1.
Tensor softmax(const Tensor& x, int axis);

// Elementwise, equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);

// Reductions and broadcasts used by the attention heads.
Tensor sum_all(const Tensor& x);                               // -> [1]
Tensor sum_channels(const Tensor& chw);                        // [c,h,w] -> [h,w]
Tensor sum_spatial(const Tensor& chw);                         // [c,h,w] -> [c]
Tensor scale_channels(const Tensor& chw, const Tensor& s);     // s [c]
Tensor scale_spatial(const Tensor& chw, const Tensor& s);      // s [h,w]

// 1-d concatenation.
Tensor concat(const Tensor& a, const Tensor& b);

// Same element count, new extents. Shares the underlying value storage.
Tensor reshape(const Tensor& x, std::vector<int> shape);

// Row i of a [n,m] matrix -> [m]. Gradient scatters into that row only.
Tensor select_row(const Tensor& matrix, int row);

// Elementwise square root; differentiable only where x > 0.
Tensor sqrt_elem(const Tensor& x);

// max(x, floor) elementwise; gradient passes where x > floor.
Tensor clamp_min(const Tensor& x, double floor);

// Same values, cut off from the tape. Gradients stop here.
Tensor detach(const Tensor& x);

} // namespace attrsim
