#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ggt/ops.hpp"
#include "ggt/tensor.hpp"

namespace ggt {

/// A learnable tensor and its accumulated gradient (same shape, starts at zero).
///
/// `grad` is mutable: forward passes take weights by const reference, and only
/// Trace::backward writes the gradient.
template <typename T>
struct Parameter {
    BasicTensor<T> value;
    mutable BasicTensor<T> grad;

    Parameter() = default;
    explicit Parameter(BasicTensor<T> v) : value(std::move(v)), grad(value.shape()) {}

    void zero_grad() const { grad = BasicTensor<T>(value.shape()); }
    std::size_t numel() const { return value.numel(); }
};

// One executed primitive. `macs` counts multiply-accumulates; `elementwise`
// counts outputs of the non-linear elementwise primitives (softmax, LN, GELU).
struct OpRecord {
    std::string scope;
    std::string op;
    std::uint64_t macs = 0;
    std::uint64_t elementwise = 0;
};

// First use of a distinct Parameter inside a trace.
struct ParamRecord {
    std::string scope;
    std::uint64_t numel = 0;
};

enum class GradMode { record, off };

template <typename T>
class Trace;

template <typename T>
struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad; // empty until a gradient flows in
    // Reads this node's value/grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;
    const Parameter<T>* param = nullptr;
    bool requires_grad = false;

    BasicTensor<T>& grad_buffer() {
        if (grad.empty()) grad = BasicTensor<T>(value.shape());
        return grad;
    }
};

/// Handle to a value produced inside a Trace.
template <typename T>
class Var {
public:
    Var() = default;
    Var(std::shared_ptr<Node<T>> node, Trace<T>* trace) : node_(std::move(node)), trace_(trace) {}

    bool valid() const { return node_ != nullptr; }
    const BasicTensor<T>& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_->requires_grad; }

    Trace<T>& trace() const { return *trace_; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
    Trace<T>* trace_ = nullptr;
};

/// Evaluation context: records every primitive executed through it (for cost
/// accounting) and, in GradMode::record, the tape needed for reverse-mode
/// gradients. Single-threaded; parameters are only written by backward().
template <typename T>
class Trace {
public:
    using BackwardFn = std::function<void(Node<T>&)>;

    explicit Trace(GradMode mode = GradMode::record) : mode_(mode) {}
    Trace(const Trace&) = delete;
    Trace& operator=(const Trace&) = delete;

    bool recording() const { return mode_ == GradMode::record; }

    Var<T> constant(BasicTensor<T> value);
    Var<T> param(const Parameter<T>& p);

    // Reverse sweep from a scalar loss; accumulates into Parameter::grad.
    void backward(const Var<T>& loss);

    const std::vector<OpRecord>& records() const { return records_; }
    const std::vector<ParamRecord>& parameters() const { return params_; }

    void push_scope(std::string_view name);
    void pop_scope();
    const std::string& scope() const { return scope_; }

    // Used by op implementations. `inputs` are the differentiable parents.
    Var<T> record(std::string_view op, BasicTensor<T> value, std::initializer_list<const Var<T>*> inputs,
                  BackwardFn backward, std::uint64_t macs = 0, std::uint64_t elementwise = 0);
    Var<T> record(std::string_view op, BasicTensor<T> value, const std::vector<Var<T>>& inputs,
                  BackwardFn backward, std::uint64_t macs = 0, std::uint64_t elementwise = 0);

private:
    GradMode mode_;
    bool consumed_ = false;
    std::vector<std::shared_ptr<Node<T>>> tape_;
    std::vector<OpRecord> records_;
    std::vector<ParamRecord> params_;
    std::unordered_set<const void*> seen_params_;
    std::vector<std::size_t> scope_marks_;
    std::string scope_;
};

template <typename T>
class ScopeGuard {
public:
    ScopeGuard(Trace<T>& trace, std::string_view name) : trace_(trace) { trace_.push_scope(name); }
    ~ScopeGuard() { trace_.pop_scope(); }
    ScopeGuard(const ScopeGuard&) = delete;
    ScopeGuard& operator=(const ScopeGuard&) = delete;

private:
    Trace<T>& trace_;
};

// Differentiable primitives. Every op requires its operands to share one trace.

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> transpose(const Var<T>& a);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w);
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
template <typename T> Var<T> softmax_rows(const Var<T>& x);
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = kLayerNormEps);
template <typename T> Var<T> gelu(const Var<T>& x);
template <typename T> Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& k);

// out row i = x row index[i]; repeated indices accumulate in backward.
template <typename T> Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> index);
// out.flat[i] = x.flat[index[i]], reshaped to `shape`.
template <typename T> Var<T> gather(const Var<T>& x, std::span<const std::size_t> index, Shape shape);
template <typename T> Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t count);
template <typename T> Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count);
template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);

// Average-pool an (h*w) x C token grid by r x r blocks.
template <typename T>
Var<T> avg_pool_grid(const Var<T>& x, std::size_t h, std::size_t w, std::size_t r);
// Column means of an N x C matrix, as 1 x C.
template <typename T> Var<T> mean_rows(const Var<T>& x);
// Non-overlapping p x p patches of a C x H x W image, one row per patch,
// features ordered (channel, dy, dx).
template <typename T> Var<T> patchify(const Var<T>& image, std::size_t p);

template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> weighted_sum(const Var<T>& x, const BasicTensor<T>& weights);

struct FdReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t checked = 0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares reverse-mode gradients of `f` against central differences for every
/// element of `params`. Relative error is |a - n| / max(|a|, |n|, 1e-8).
FdReport finite_diff_check(const std::function<Var<double>(Trace<double>&)>& f,
                           std::span<Parameter<double>* const> params, double tol, double step = 1e-4);

} // namespace ggt
