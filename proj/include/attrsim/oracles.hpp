#pragma once

#include <functional>
#include <string>
#include <vector>

#include "attrsim/adam.hpp"
#include "attrsim/tensor.hpp"

namespace attrsim {

// Reference implementations kept deliberately naive and separate from the
// production code paths they check. The selftest command and the unit tests
// both run them.

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_coordinate;
};

// Compares reverse-mode gradients of forward() against central finite
// differences for every element of every parameter. forward() must rebuild
// its graph from the current parameter values and return a scalar.
GradCheckResult check_gradients(const std::vector<NamedTensor>& params,
                                const std::function<Tensor()>& forward, double step = 1e-5);

// Flood-fill labeling of a binary grid; -1 marks zero pixels. connectivity
// is 4 or 8.
std::vector<int> floodfill_labels(const std::vector<unsigned char>& grid, int rows, int cols,
                                  int connectivity);

// Direct-definition average precision over a ranked relevance list.
double reference_average_precision(const std::vector<bool>& relevant, int total_relevant);

} // namespace attrsim
