#include "attrsim/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "attrsim/errors.hpp"
#include "attrsim/ops.hpp"

namespace attrsim {

namespace {

constexpr double kNormFloor = 1e-12;

void check_pair(const Tensor& u, const Tensor& v) {
    if (u.ndim() != 1 || v.ndim() != 1) {
        throw ShapeError("cosine expects 1-d tensors, got " + shape_str(u.shape()) +
                         " and " + shape_str(v.shape()));
    }
    if (u.extent(0) != v.extent(0)) {
        throw ShapeError("cosine length mismatch: " + shape_str(u.shape()) +
                         " vs " + shape_str(v.shape()));
    }
    if (u.extent(0) < 1) {
        throw ShapeError("cosine of empty vectors");
    }
}

} // namespace

double cosine_value(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size() || u.empty()) {
        std::ostringstream msg;
        msg << "cosine length mismatch: " << u.size() << " vs " << v.size();
        throw ShapeError(msg.str());
    }
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    const double nu = std::max(std::sqrt(uu), kNormFloor);
    const double nv = std::max(std::sqrt(vv), kNormFloor);
    return dot / (nu * nv);
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
    check_pair(u, v);
    Tensor dot = sum_all(mul(u, v));
    Tensor nu = sqrt_elem(clamp_min(sum_all(mul(u, u)), kNormFloor * kNormFloor));
    Tensor nv = sqrt_elem(clamp_min(sum_all(mul(v, v)), kNormFloor * kNormFloor));
    return div(dot, mul(nu, nv));
}

double triplet_loss(double s_pos, double s_neg, double margin) {
    return std::max(0.0, margin - s_pos + s_neg);
}

Tensor triplet_loss(const Tensor& s_pos, const Tensor& s_neg, double margin) {
    return clamp_min(add_scalar(sub(s_neg, s_pos), margin), 0.0);
}

Tensor alignment_loss(const std::vector<Tensor>& globals,
                      const std::vector<Tensor>& locals) {
    if (globals.empty() || globals.size() != locals.size()) {
        std::ostringstream msg;
        msg << "alignment needs matched non-empty pair lists, got "
            << globals.size() << " and " << locals.size();
        throw ContractError(msg.str());
    }
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < globals.size(); ++i) {
        Tensor gap = sub(Tensor::scalar(1.0), cosine_similarity(globals[i], locals[i]));
        total = add(total, gap);
    }
    return total;
}

double joint_loss(double l_g, double l_l, double l_a, const LossWeights& w) {
    return w.alpha * l_g + w.beta * l_l + w.gamma * l_a;
}

Tensor joint_loss(const Tensor& l_g, const Tensor& l_l, const Tensor& l_a,
                  const LossWeights& w) {
    Tensor out = mul_scalar(l_g, w.alpha);
    out = add(out, mul_scalar(l_l, w.beta));
    return add(out, mul_scalar(l_a, w.gamma));
}

} // namespace attrsim
