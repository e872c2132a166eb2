#include "attrsim/adam.hpp"

#include <cmath>

#include "attrsim/errors.hpp"

namespace attrsim {

void AdamState::step(const std::vector<NamedTensor>& params) {
    if (params.empty()) {
        throw ContractError("adam step on an empty parameter group");
    }
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].tensor.size(), 0.0);
            v_[i].assign(params[i].tensor.size(), 0.0);
        }
    } else if (m_.size() != params.size()) {
        throw ContractError("adam step: parameter group size changed");
    }

    steps_ += 1;
    const double t = static_cast<double>(steps_);
    const double rate = config_.lr * std::sqrt(1.0 - std::pow(config_.beta2, t)) /
                        (1.0 - std::pow(config_.beta1, t));

    for (std::size_t i = 0; i < params.size(); ++i) {
        const NamedTensor& p = params[i];
        if (!p.tensor.has_grad()) {
            throw ContractError("adam step: parameter '" + p.name + "' has no gradient");
        }
        if (m_[i].size() != p.tensor.size()) {
            throw ContractError("adam step: parameter '" + p.name + "' changed size");
        }
        const double* g = p.tensor.grad().data();
        double* w = const_cast<Tensor&>(p.tensor).mutable_data().data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        for (std::size_t j = 0; j < p.tensor.size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            w[j] -= rate * m[j] / (std::sqrt(v[j]) + config_.eps);
        }
        p.tensor.clear_grad();
    }
}

void AdamState::restore(std::int64_t steps, std::vector<std::vector<double>> m,
                        std::vector<std::vector<double>> v) {
    if (m.size() != v.size()) {
        throw ContractError("adam restore: moment group sizes disagree");
    }
    steps_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
}

} // namespace attrsim
