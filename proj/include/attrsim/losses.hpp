#pragma once

#include <span>
#include <vector>

#include "attrsim/tensor.hpp"

namespace attrsim {

// Loss weights and the ranking margin. Defaults follow the training recipe.
struct LossWeights {
    double alpha = 1.0;  // global triplet term
    double beta = 0.1;   // local triplet term
    double gamma = 0.1;  // global/local alignment term
    double margin = 0.2;
};

// Plain cosine with both norms floored at 1e-12. Shared by retrieval scoring
// and the graph builder below; zero vectors score ~0 instead of NaN.
double cosine_value(std::span<const double> u, std::span<const double> v);

// Differentiable cosine similarity of two 1-d tensors. The floor is applied
// inside the graph as sqrt(max(sum of squares, 1e-24)), which equals
// max(norm, 1e-12) but keeps sqrt away from zero in the backward pass.
Tensor cosine_similarity(const Tensor& u, const Tensor& v);

// max(0, margin - s_pos + s_neg), per triplet.
double triplet_loss(double s_pos, double s_neg, double margin);
Tensor triplet_loss(const Tensor& s_pos, const Tensor& s_neg, double margin);

// Sum over matched pairs of (1 - cos(global_i, local_i)). Callers pass the
// three pairs of one triplet or a whole batch; the reduction is a sum.
Tensor alignment_loss(const std::vector<Tensor>& globals,
                      const std::vector<Tensor>& locals);

// alpha*L_g + beta*L_l + gamma*L_a.
double joint_loss(double l_g, double l_l, double l_a, const LossWeights& w);
Tensor joint_loss(const Tensor& l_g, const Tensor& l_l, const Tensor& l_a,
                  const LossWeights& w);

} // namespace attrsim
