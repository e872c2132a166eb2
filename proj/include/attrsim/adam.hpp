#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attrsim/tensor.hpp"

namespace attrsim {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First and second moment buffers for one fixed parameter group. The group's
// size and per-parameter element counts are pinned on the first step; a later
// mismatch means the caller rewired the model and is an error.
class AdamState {
public:
    explicit AdamState(AdamConfig config = {}) : config_(config) {}

    AdamConfig& config() { return config_; }
    const AdamConfig& config() const { return config_; }
    std::int64_t step_count() const { return steps_; }

    // One update over the group. Every parameter must carry a gradient;
    // gradients are cleared afterwards. Uses the classic schedule
    //   rate_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t)
    //   p     -= rate_t * m / (sqrt(v) + eps)
    // which keeps the first step magnitude at lr * |g| / (|g| + eps') exactly.
    void step(const std::vector<NamedTensor>& params);

    // Checkpoint plumbing.
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore(std::int64_t steps, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v);

private:
    AdamConfig config_;
    std::int64_t steps_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace attrsim
