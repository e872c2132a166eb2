#include "attrsim/tensor.hpp"

#include <atomic>
#include <sstream>

#include "attrsim/errors.hpp"

namespace attrsim {

std::string shape_str(std::span<const int> shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out << ',';
        }
        out << shape[i];
    }
    out << ']';
    return out.str();
}

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) {
            throw ShapeError("tensor shape must have positive extents, got " +
                             shape_str(shape));
        }
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

} // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    std::size_t n = checked_numel(shape);
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<double>>(n, 0.0);
    t.grad_ = std::make_shared<GradSlot>();
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (double& v : *t.data_) {
        v = value;
    }
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> values) {
    std::size_t n = checked_numel(shape);
    if (values.size() != n) {
        throw ShapeError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<double>>(std::move(values));
    t.grad_ = std::make_shared<GradSlot>();
    return t;
}

Tensor Tensor::scalar(double value) {
    return from_data({1}, {value});
}

int Tensor::extent(int axis) const {
    if (axis < 0 || axis >= ndim()) {
        throw ContractError("tensor axis " + std::to_string(axis) +
                            " out of range for shape " + shape_str(shape_));
    }
    return shape_[static_cast<std::size_t>(axis)];
}

std::span<const double> Tensor::data() const {
    if (!data_) {
        throw ContractError("use of an undefined tensor");
    }
    return {data_->data(), data_->size()};
}

std::span<double> Tensor::mutable_data() {
    if (!data_) {
        throw ContractError("use of an undefined tensor");
    }
    return {data_->data(), data_->size()};
}

double Tensor::item() const {
    if (size() != 1) {
        throw ContractError("item() requires a single-element tensor, got shape " +
                            shape_str(shape_));
    }
    return (*data_)[0];
}

double Tensor::operator()(int i) const {
    if (ndim() != 1) {
        throw ContractError("1-d indexing on tensor of shape " + shape_str(shape_));
    }
    return (*data_)[static_cast<std::size_t>(i)];
}

std::size_t Tensor::offset2(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
           static_cast<std::size_t>(j);
}

double Tensor::operator()(int i, int j) const {
    if (ndim() != 2) {
        throw ContractError("2-d indexing on tensor of shape " + shape_str(shape_));
    }
    return (*data_)[offset2(i, j)];
}

double Tensor::operator()(int i, int j, int k) const {
    if (ndim() != 3) {
        throw ContractError("3-d indexing on tensor of shape " + shape_str(shape_));
    }
    std::size_t idx = (static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
                       static_cast<std::size_t>(j)) *
                          static_cast<std::size_t>(shape_[2]) +
                      static_cast<std::size_t>(k);
    return (*data_)[idx];
}

double Tensor::operator()(int i, int j, int k, int l) const {
    if (ndim() != 4) {
        throw ContractError("4-d indexing on tensor of shape " + shape_str(shape_));
    }
    std::size_t idx =
        ((static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
          static_cast<std::size_t>(j)) *
             static_cast<std::size_t>(shape_[2]) +
         static_cast<std::size_t>(k)) *
            static_cast<std::size_t>(shape_[3]) +
        static_cast<std::size_t>(l);
    return (*data_)[idx];
}

Tensor& Tensor::set_requires_grad(bool on) {
    if (!data_) {
        throw ContractError("set_requires_grad on an undefined tensor");
    }
    requires_grad_ = on;
    return *this;
}

bool Tensor::has_grad() const {
    return grad_ && !grad_->values.empty();
}

std::span<const double> Tensor::grad() const {
    if (!has_grad()) {
        throw ContractError("gradient requested but absent; tensor was not touched by backward");
    }
    return {grad_->values.data(), grad_->values.size()};
}

std::span<double> Tensor::grad_buffer() const {
    if (!data_) {
        throw ContractError("grad_buffer on an undefined tensor");
    }
    if (grad_->values.empty()) {
        grad_->values.assign(data_->size(), 0.0);
    }
    return {grad_->values.data(), grad_->values.size()};
}

void Tensor::clear_grad() const {
    if (grad_) {
        grad_->values.clear();
    }
}

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

} // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {
    if (g_active_tape != nullptr) {
        throw ContractError("a tape is already active on this thread");
    }
    g_active_tape = this;
}

Tape::~Tape() {
    if (g_active_tape == this) {
        g_active_tape = nullptr;
    }
}

Tape* Tape::active() {
    return g_active_tape;
}

void Tape::record(std::function<void()> backward_step) {
    nodes_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_str(loss.shape()));
    }
    if (loss.tape_id() != id_) {
        throw ContractError("backward: loss was not produced under this tape");
    }
    loss.grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        (*it)();
    }
}

bool tracked(const Tensor& t) {
    if (t.requires_grad()) {
        return true;
    }
    Tape* tape = Tape::active();
    return tape != nullptr && t.tape_id() == tape->id();
}

} // namespace attrsim
