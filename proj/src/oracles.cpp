#include "attrsim/oracles.hpp"

#include <cmath>
#include <cstdlib>

#include "attrsim/errors.hpp"

namespace attrsim {

GradCheckResult check_gradients(const std::vector<NamedTensor>& params,
                                const std::function<Tensor()>& forward, double step) {
    // One taped pass for the reverse-mode gradients.
    std::vector<std::vector<double>> autodiff;
    {
        for (const auto& p : params) {
            p.tensor.clear_grad();
        }
        Tape tape;
        Tensor loss = forward();
        tape.backward(loss);
        for (const auto& p : params) {
            if (p.tensor.has_grad()) {
                auto g = p.tensor.grad();
                autodiff.emplace_back(g.begin(), g.end());
            } else {
                autodiff.emplace_back(p.tensor.size(), 0.0);
            }
            p.tensor.clear_grad();
        }
    }

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor t = params[pi].tensor;
        auto values = t.mutable_data();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double saved = values[j];
            values[j] = saved + step;
            const double hi = forward().item();
            values[j] = saved - step;
            const double lo = forward().item();
            values[j] = saved;
            const double fd = (hi - lo) / (2.0 * step);
            const double ad = autodiff[pi][j];
            const double denom = std::max({std::abs(ad), std::abs(fd), 1e-6});
            const double rel = std::abs(ad - fd) / denom;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_coordinate = params[pi].name + "[" + std::to_string(j) + "]";
            }
        }
    }
    return result;
}

std::vector<int> floodfill_labels(const std::vector<unsigned char>& grid, int rows, int cols,
                                  int connectivity) {
    if (connectivity != 4 && connectivity != 8) {
        throw ContractError("floodfill_labels: connectivity must be 4 or 8");
    }
    std::vector<int> labels(grid.size(), -1);
    int next = 0;
    std::vector<int> stack;
    for (int start = 0; start < rows * cols; ++start) {
        if (grid[static_cast<std::size_t>(start)] == 0 ||
            labels[static_cast<std::size_t>(start)] != -1) {
            continue;
        }
        labels[static_cast<std::size_t>(start)] = next;
        stack.assign(1, start);
        while (!stack.empty()) {
            int at = stack.back();
            stack.pop_back();
            int r = at / cols;
            int c = at % cols;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) {
                        continue;
                    }
                    if (connectivity == 4 && dr != 0 && dc != 0) {
                        continue;
                    }
                    int nr = r + dr;
                    int nc = c + dc;
                    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) {
                        continue;
                    }
                    int ni = nr * cols + nc;
                    if (grid[static_cast<std::size_t>(ni)] != 0 &&
                        labels[static_cast<std::size_t>(ni)] == -1) {
                        labels[static_cast<std::size_t>(ni)] = next;
                        stack.push_back(ni);
                    }
                }
            }
        }
        ++next;
    }
    return labels;
}

double reference_average_precision(const std::vector<bool>& relevant, int total_relevant) {
    if (total_relevant <= 0) {
        throw ContractError("reference_average_precision: no relevant items");
    }
    double sum = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < relevant.size(); ++k) {
        if (relevant[k]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

} // namespace attrsim
