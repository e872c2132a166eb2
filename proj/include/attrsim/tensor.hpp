#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace attrsim {

std::string shape_str(std::span<const int> shape);

// Dense row-major tensor of doubles. Copies are shallow handles over shared
// storage. Values are treated as immutable once an op has produced them; the
// two sanctioned exceptions are parameter updates through mutable_data() and
// gradient accumulation during backward. The gradient slot is shared by all
// handles, so grads written while a model runs are visible through the
// handles the model struct keeps for its parameters.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from_data(std::vector<int> shape, std::vector<double> values);
    static Tensor scalar(double value);

    bool defined() const { return static_cast<bool>(data_); }
    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const;
    std::size_t size() const { return data_ ? data_->size() : 0; }

    std::span<const double> data() const;
    // Parameter initialization and optimizer steps only; ops never mutate inputs.
    std::span<double> mutable_data();

    double item() const;
    double operator()(int i) const;
    double operator()(int i, int j) const;
    double operator()(int i, int j, int k) const;
    double operator()(int i, int j, int k, int l) const;

    bool requires_grad() const { return requires_grad_; }
    Tensor& set_requires_grad(bool on);

    bool has_grad() const;
    std::span<const double> grad() const;
    // Allocates a zeroed gradient buffer on first use. Const because the slot
    // is shared metadata, not part of the tensor's value.
    std::span<double> grad_buffer() const;
    void clear_grad() const;

    // Op-recording internals.
    std::uint64_t tape_id() const { return tape_id_; }
    void mark_on_tape(std::uint64_t id) { tape_id_ = id; }

private:
    struct GradSlot {
        std::vector<double> values;
    };

    std::vector<int> shape_;
    std::shared_ptr<std::vector<double>> data_;
    std::shared_ptr<GradSlot> grad_;
    bool requires_grad_ = false;
    std::uint64_t tape_id_ = 0;

    std::size_t offset2(int i, int j) const;
};

// Reverse-mode tape. Constructing a Tape makes it the active tape for the
// current thread (one at a time); ops record backward closures in execution
// order while it is active. A tape and the tensors produced under it belong
// to one logical stream; separate threads use separate tapes.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    std::uint64_t id() const { return id_; }
    std::size_t node_count() const { return nodes_.size(); }
    void record(std::function<void()> backward_step);

    // Seeds d(loss)/d(loss) = 1, then replays every recorded node exactly
    // once in reverse execution order. Nodes that do not feed the loss see a
    // zero incoming gradient and contribute nothing.
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> nodes_;
    std::uint64_t id_ = 0;
};

// True when t propagates gradients under the active tape: either a leaf
// parameter or a tensor produced by an op recorded on that tape.
bool tracked(const Tensor& t);

} // namespace attrsim
