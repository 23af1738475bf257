#include "ggt/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace ggt {

namespace {

template <typename T>
BasicTensor<T>* grad_of(const std::shared_ptr<Node<T>>& n) {
    return n->requires_grad ? &n->grad_buffer() : nullptr;
}

template <typename T>
Trace<T>& trace_of(std::initializer_list<const Var<T>*> vars, const char* op) {
    Trace<T>* trace = nullptr;
    for (const Var<T>* v : vars) {
        if (!v->valid()) throw StateError(std::string(op) + ": uninitialized operand");
        if (trace && &v->trace() != trace) throw StateError(std::string(op) + ": operands from different traces");
        trace = &v->trace();
    }
    return *trace;
}

void require_rank2(const Shape& s, const char* op) {
    if (s.size() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(s));
}

} // namespace

// ---- Trace ---------------------------------------------------------------

template <typename T>
Var<T> Trace<T>::constant(BasicTensor<T> value) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    return Var<T>(std::move(node), this);
}

template <typename T>
Var<T> Trace<T>::param(const Parameter<T>& p) {
    if (seen_params_.insert(&p).second) params_.push_back({scope_, p.numel()});
    auto node = std::make_shared<Node<T>>();
    node->value = p.value;
    if (recording()) {
        node->param = &p;
        node->requires_grad = true;
        tape_.push_back(node);
    }
    return Var<T>(std::move(node), this);
}

template <typename T>
Var<T> Trace<T>::record(std::string_view op, BasicTensor<T> value, std::initializer_list<const Var<T>*> inputs,
                        BackwardFn backward, std::uint64_t macs, std::uint64_t elementwise) {
    bool needs_grad = false;
    for (const Var<T>* in : inputs) {
        if (!in->valid() || &in->trace() != this) throw StateError("record: operand from a different trace");
        needs_grad = needs_grad || in->requires_grad();
    }
    records_.push_back({scope_, std::string(op), macs, elementwise});
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    if (recording() && needs_grad) {
        node->requires_grad = true;
        node->backward = std::move(backward);
        tape_.push_back(node);
    }
    return Var<T>(std::move(node), this);
}

template <typename T>
Var<T> Trace<T>::record(std::string_view op, BasicTensor<T> value, const std::vector<Var<T>>& inputs,
                        BackwardFn backward, std::uint64_t macs, std::uint64_t elementwise) {
    bool needs_grad = false;
    for (const Var<T>& in : inputs) {
        if (!in.valid() || &in.trace() != this) throw StateError("record: operand from a different trace");
        needs_grad = needs_grad || in.requires_grad();
    }
    records_.push_back({scope_, std::string(op), macs, elementwise});
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    if (recording() && needs_grad) {
        node->requires_grad = true;
        node->backward = std::move(backward);
        tape_.push_back(node);
    }
    return Var<T>(std::move(node), this);
}

template <typename T>
void Trace<T>::backward(const Var<T>& loss) {
    if (!recording()) throw StateError("backward: trace was created with gradients disabled");
    if (consumed_) throw StateError("backward: already run on this trace");
    if (records_.empty()) throw StateError("backward: no forward pass recorded");
    if (!loss.valid() || &loss.trace() != this) throw StateError("backward: loss was not produced by this trace");
    if (loss.value().numel() != 1) {
        throw DimensionError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
    }
    consumed_ = true;
    if (!loss.requires_grad()) {
        tape_.clear();
        return;
    }
    loss.node()->grad_buffer()[0] = T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        Node<T>& node = **it;
        if (node.grad.empty()) continue;
        if (node.param) {
            auto& dst = node.param->grad;
            if (dst.shape() != node.grad.shape()) dst = BasicTensor<T>(node.grad.shape());
            for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += node.grad[i];
        } else if (node.backward) {
            node.backward(node);
        }
    }
    tape_.clear();
}

template <typename T>
void Trace<T>::push_scope(std::string_view name) {
    scope_marks_.push_back(scope_.size());
    if (!scope_.empty()) scope_ += '.';
    scope_ += name;
}

template <typename T>
void Trace<T>::pop_scope() {
    if (scope_marks_.empty()) throw StateError("pop_scope: no open scope");
    scope_.resize(scope_marks_.back());
    scope_marks_.pop_back();
}

// ---- primitives ----------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    auto& tr = trace_of({&a, &b}, "matmul");
    auto value = matmul(a.value(), b.value());
    const std::uint64_t macs = std::uint64_t(a.shape()[0]) * a.shape()[1] * b.shape()[1];
    auto na = a.node(), nb = b.node();
    return tr.record("matmul", std::move(value), {&a, &b}, [na, nb](Node<T>& self) {
        kernels::matmul_backward(na->value, nb->value, self.grad, grad_of(na), grad_of(nb));
    }, macs);
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
    auto& tr = trace_of({&a}, "transpose");
    auto na = a.node();
    return tr.record("transpose", transpose(a.value()), {&a}, [na](Node<T>& self) {
        auto& g = na->grad_buffer();
        const std::size_t m = g.rows(), n = g.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g.at(i, j) += self.grad.at(j, i);
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    auto& tr = trace_of({&a, &b}, "add");
    if (a.shape() != b.shape()) {
        throw DimensionError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    BasicTensor<T> value = a.value();
    for (std::size_t i = 0; i < value.numel(); ++i) value[i] += b.value()[i];
    auto na = a.node(), nb = b.node();
    return tr.record("add", std::move(value), {&a, &b}, [na, nb](Node<T>& self) {
        for (auto* g : {grad_of(na), grad_of(nb)}) {
            if (!g) continue;
            for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
    auto& tr = trace_of({&a}, "scale");
    BasicTensor<T> value = a.value();
    for (auto& v : value.data()) v *= s;
    auto na = a.node();
    return tr.record("scale", std::move(value), {&a}, [na, s](Node<T>& self) {
        auto& g = na->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s * self.grad[i];
    });
}

namespace {

template <typename T>
Var<T> linear_impl(const Var<T>& x, const Var<T>& w, const Var<T>* b) {
    auto& tr = b ? trace_of({&x, &w, b}, "linear") : trace_of({&x, &w}, "linear");
    auto value = linear(x.value(), w.value(), b ? &b->value() : nullptr);
    const std::uint64_t macs = std::uint64_t(x.shape()[0]) * w.shape()[0] * w.shape()[1];
    auto nx = x.node(), nw = w.node();
    std::shared_ptr<Node<T>> nb = b ? b->node() : nullptr;
    auto backward = [nx, nw, nb](Node<T>& self) {
        kernels::matmul_backward(nx->value, nw->value, self.grad, grad_of(nx), grad_of(nw));
        if (nb && nb->requires_grad) {
            auto& gb = nb->grad_buffer();
            const std::size_t n = self.grad.cols();
            for (std::size_t i = 0; i < self.grad.rows(); ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad.at(i, j);
        }
    };
    if (b) return tr.record("linear", std::move(value), {&x, &w, b}, backward, macs);
    return tr.record("linear", std::move(value), {&x, &w}, backward, macs);
}

} // namespace

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w) {
    return linear_impl<T>(x, w, nullptr);
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    return linear_impl<T>(x, w, &b);
}

template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
    auto& tr = trace_of({&x}, "softmax_rows");
    auto value = softmax_rows(x.value());
    const std::uint64_t n = value.numel();
    auto nx = x.node();
    return tr.record("softmax_rows", std::move(value), {&x}, [nx](Node<T>& self) {
        kernels::softmax_rows_backward(self.value, self.grad, nx->grad_buffer());
    }, 0, n);
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
    auto& tr = trace_of({&x, &gamma, &beta}, "layer_norm");
    auto value = layer_norm(x.value(), gamma.value(), beta.value(), eps);
    const std::uint64_t n = value.numel();
    auto nx = x.node(), ng = gamma.node(), nb = beta.node();
    return tr.record("layer_norm", std::move(value), {&x, &gamma, &beta}, [nx, ng, nb, eps](Node<T>& self) {
        kernels::layer_norm_backward(nx->value, ng->value, eps, self.grad, grad_of(nx), grad_of(ng), grad_of(nb));
    }, 0, n);
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
    auto& tr = trace_of({&x}, "gelu");
    auto value = gelu(x.value());
    const std::uint64_t n = value.numel();
    auto nx = x.node();
    return tr.record("gelu", std::move(value), {&x}, [nx](Node<T>& self) {
        kernels::gelu_backward(nx->value, self.grad, nx->grad_buffer());
    }, 0, n);
}

template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& k) {
    auto& tr = trace_of({&x, &k}, "depthwise_conv2d");
    auto value = depthwise_conv2d(x.value(), k.value());
    const std::uint64_t macs = std::uint64_t(x.value().numel()) * k.shape()[1] * k.shape()[2];
    auto nx = x.node(), nk = k.node();
    return tr.record("depthwise_conv2d", std::move(value), {&x, &k}, [nx, nk](Node<T>& self) {
        kernels::depthwise_conv2d_backward(nx->value, nk->value, self.grad, grad_of(nx), grad_of(nk));
    }, macs);
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> index) {
    auto& tr = trace_of({&x}, "gather_rows");
    require_rank2(x.shape(), "gather_rows");
    const std::size_t rows = x.shape()[0], c = x.shape()[1];
    BasicTensor<T> value({index.size(), c});
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= rows) {
            throw DimensionError("gather_rows: index " + std::to_string(index[i]) + " out of range for " +
                                 shape_str(x.shape()));
        }
        std::copy_n(x.value().data().data() + index[i] * c, c, value.data().data() + i * c);
    }
    auto nx = x.node();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return tr.record("gather_rows", std::move(value), {&x}, [nx, idx = std::move(idx), c](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
    });
}

template <typename T>
Var<T> gather(const Var<T>& x, std::span<const std::size_t> index, Shape shape) {
    auto& tr = trace_of({&x}, "gather");
    if (checked_numel(shape) != index.size()) {
        throw DimensionError("gather: " + std::to_string(index.size()) + " indices for shape " + shape_str(shape));
    }
    BasicTensor<T> value(std::move(shape));
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= x.value().numel()) throw DimensionError("gather: index out of range");
        value[i] = x.value()[index[i]];
    }
    auto nx = x.node();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return tr.record("gather", std::move(value), {&x}, [nx, idx = std::move(idx)](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
    });
}

template <typename T>
Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t count) {
    auto& tr = trace_of({&x}, "slice_rows");
    require_rank2(x.shape(), "slice_rows");
    const std::size_t c = x.shape()[1];
    if (count == 0 || begin + count > x.shape()[0]) {
        throw DimensionError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                             ") out of range for " + shape_str(x.shape()));
    }
    const auto* src = x.value().data().data() + begin * c;
    BasicTensor<T> value({count, c}, std::vector<T>(src, src + count * c));
    auto nx = x.node();
    return tr.record("slice_rows", std::move(value), {&x}, [nx, begin, c](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) g[begin * c + i] += self.grad[i];
    });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count) {
    auto& tr = trace_of({&x}, "slice_cols");
    require_rank2(x.shape(), "slice_cols");
    const std::size_t rows = x.shape()[0], c = x.shape()[1];
    if (count == 0 || begin + count > c) {
        throw DimensionError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                             ") out of range for " + shape_str(x.shape()));
    }
    BasicTensor<T> value({rows, count});
    for (std::size_t i = 0; i < rows; ++i)
        std::copy_n(x.value().data().data() + i * c + begin, count, value.data().data() + i * count);
    auto nx = x.node();
    return tr.record("slice_cols", std::move(value), {&x}, [nx, begin, c, count](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t i = 0; i < self.grad.rows(); ++i)
            for (std::size_t j = 0; j < count; ++j) g[i * c + begin + j] += self.grad[i * count + j];
    });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    auto& tr = parts.front().trace();
    const std::size_t c = parts.front().shape().at(1);
    std::size_t rows = 0;
    for (const auto& p : parts) {
        require_rank2(p.shape(), "concat_rows");
        if (p.shape()[1] != c) throw DimensionError("concat_rows: column extents differ");
        rows += p.shape()[0];
    }
    std::vector<T> data;
    data.reserve(rows * c);
    std::vector<std::shared_ptr<Node<T>>> nodes;
    for (const auto& p : parts) {
        data.insert(data.end(), p.value().data().begin(), p.value().data().end());
        nodes.push_back(p.node());
    }
    return tr.record("concat_rows", BasicTensor<T>({rows, c}, std::move(data)), parts,
                     [nodes = std::move(nodes)](Node<T>& self) {
                         std::size_t offset = 0;
                         for (const auto& n : nodes) {
                             const std::size_t len = n->value.numel();
                             if (auto* g = grad_of(n))
                                 for (std::size_t i = 0; i < len; ++i) (*g)[i] += self.grad[offset + i];
                             offset += len;
                         }
                     });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    auto& tr = parts.front().trace();
    const std::size_t rows = parts.front().shape().at(0);
    std::size_t c = 0;
    for (const auto& p : parts) {
        require_rank2(p.shape(), "concat_cols");
        if (p.shape()[0] != rows) throw DimensionError("concat_cols: row extents differ");
        c += p.shape()[1];
    }
    BasicTensor<T> value({rows, c});
    std::vector<std::shared_ptr<Node<T>>> nodes;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p.shape()[1];
        for (std::size_t i = 0; i < rows; ++i)
            std::copy_n(p.value().data().data() + i * pc, pc, value.data().data() + i * c + offset);
        offset += pc;
        nodes.push_back(p.node());
    }
    return tr.record("concat_cols", std::move(value), parts, [nodes = std::move(nodes), c](Node<T>& self) {
        std::size_t offset = 0;
        for (const auto& n : nodes) {
            const std::size_t pc = n->value.cols();
            if (auto* g = grad_of(n)) {
                for (std::size_t i = 0; i < g->rows(); ++i)
                    for (std::size_t j = 0; j < pc; ++j) g->at(i, j) += self.grad[i * c + offset + j];
            }
            offset += pc;
        }
    });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
    auto& tr = trace_of({&x}, "reshape");
    auto nx = x.node();
    return tr.record("reshape", x.value().reshaped(std::move(shape)), {&x}, [nx](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

template <typename T>
Var<T> avg_pool_grid(const Var<T>& x, std::size_t h, std::size_t w, std::size_t r) {
    auto& tr = trace_of({&x}, "avg_pool_grid");
    require_rank2(x.shape(), "avg_pool_grid");
    if (x.shape()[0] != h * w) {
        throw DimensionError("avg_pool_grid: " + shape_str(x.shape()) + " is not a " + std::to_string(h) + "x" +
                             std::to_string(w) + " grid");
    }
    if (r == 0 || h % r || w % r) {
        throw ConfigError("avg_pool_grid: grid " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by reduction " + std::to_string(r));
    }
    const std::size_t c = x.shape()[1], ph = h / r, pw = w / r;
    const T inv = T(1) / static_cast<T>(r * r);
    BasicTensor<T> value({ph * pw, c});
    for (std::size_t py = 0; py < ph; ++py)
        for (std::size_t px = 0; px < pw; ++px)
            for (std::size_t dy = 0; dy < r; ++dy)
                for (std::size_t dx = 0; dx < r; ++dx) {
                    const std::size_t src = (py * r + dy) * w + px * r + dx;
                    for (std::size_t j = 0; j < c; ++j) value.at(py * pw + px, j) += x.value().at(src, j);
                }
    for (auto& v : value.data()) v *= inv;
    auto nx = x.node();
    return tr.record("avg_pool_grid", std::move(value), {&x}, [nx, w, r, c, ph, pw, inv](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t py = 0; py < ph; ++py)
            for (std::size_t px = 0; px < pw; ++px)
                for (std::size_t dy = 0; dy < r; ++dy)
                    for (std::size_t dx = 0; dx < r; ++dx) {
                        const std::size_t dst = (py * r + dy) * w + px * r + dx;
                        for (std::size_t j = 0; j < c; ++j) g.at(dst, j) += inv * self.grad.at(py * pw + px, j);
                    }
    });
}

template <typename T>
Var<T> mean_rows(const Var<T>& x) {
    auto& tr = trace_of({&x}, "mean_rows");
    require_rank2(x.shape(), "mean_rows");
    const std::size_t n = x.shape()[0], c = x.shape()[1];
    BasicTensor<T> value({1, c});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) value[j] += x.value().at(i, j);
    const T inv = T(1) / static_cast<T>(n);
    for (auto& v : value.data()) v *= inv;
    auto nx = x.node();
    return tr.record("mean_rows", std::move(value), {&x}, [nx, inv](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) g.at(i, j) += inv * self.grad[j];
    });
}

template <typename T>
Var<T> patchify(const Var<T>& image, std::size_t p) {
    auto& tr = trace_of({&image}, "patchify");
    const auto& s = image.shape();
    if (s.size() != 3) throw DimensionError("patchify: expected C x H x W, got " + shape_str(s));
    const std::size_t c = s[0], h = s[1], w = s[2];
    if (p == 0 || h % p || w % p) {
        throw ConfigError("patchify: image " + shape_str(s) + " not divisible by patch size " + std::to_string(p));
    }
    const std::size_t gh = h / p, gw = w / p, f = c * p * p;
    std::vector<std::size_t> src(gh * gw * f);
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t dy = 0; dy < p; ++dy)
                    for (std::size_t dx = 0; dx < p; ++dx)
                        src[(py * gw + px) * f + (ch * p + dy) * p + dx] =
                            (ch * h + py * p + dy) * w + px * p + dx;
    BasicTensor<T> value({gh * gw, f});
    for (std::size_t i = 0; i < src.size(); ++i) value[i] = image.value()[src[i]];
    auto ni = image.node();
    return tr.record("patchify", std::move(value), {&image}, [ni, src = std::move(src)](Node<T>& self) {
        auto& g = ni->grad_buffer();
        for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
    });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
    auto& tr = trace_of({&x}, "sum");
    T acc = 0;
    for (T v : x.value().data()) acc += v;
    auto nx = x.node();
    return tr.record("sum", BasicTensor<T>({1}, std::vector<T>{acc}), {&x}, [nx](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (auto& v : g.data()) v += self.grad[0];
    });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const BasicTensor<T>& weights) {
    auto& tr = trace_of({&x}, "weighted_sum");
    if (weights.numel() != x.value().numel()) {
        throw DimensionError("weighted_sum: " + shape_str(x.shape()) + " vs weights " + shape_str(weights.shape()));
    }
    T acc = 0;
    for (std::size_t i = 0; i < weights.numel(); ++i) acc += x.value()[i] * weights[i];
    auto nx = x.node();
    return tr.record("weighted_sum", BasicTensor<T>({1}, std::vector<T>{acc}), {&x}, [nx, weights](Node<T>& self) {
        auto& g = nx->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[0] * weights[i];
    });
}

// ---- finite differences --------------------------------------------------

FdReport finite_diff_check(const std::function<Var<double>(Trace<double>&)>& f,
                           std::span<Parameter<double>* const> params, double tol, double step) {
    for (auto* p : params) p->zero_grad();
    {
        Trace<double> trace(GradMode::record);
        Var<double> loss = f(trace);
        if (!std::isfinite(loss.value()[0])) throw NumericError("finite_diff_check: non-finite loss");
        trace.backward(loss);
    }
    auto evaluate = [&]() {
        Trace<double> trace(GradMode::off);
        const double v = f(trace).value()[0];
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss under perturbation");
        return v;
    };

    FdReport report;
    report.tolerance = tol;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter<double>& p = *params[pi];
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + step;
            const double fp = evaluate();
            p.value[i] = saved - step;
            const double fm = evaluate();
            p.value[i] = saved;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic = p.grad[i];
            if (!std::isfinite(analytic)) throw NumericError("finite_diff_check: non-finite analytic gradient");
            const double abs_err = std::abs(analytic - numeric);
            const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            report.max_abs_error = std::max(report.max_abs_error, abs_err);
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = pi;
                report.worst_index = i;
            }
            ++report.checked;
        }
    }
    report.passed = report.max_rel_error <= tol;
    return report;
}

#define GGT_INSTANTIATE_AUTOGRAD(T)                                                                     \
    template class Trace<T>;                                                                            \
    template Var<T> matmul(const Var<T>&, const Var<T>&);                                               \
    template Var<T> transpose(const Var<T>&);                                                           \
    template Var<T> add(const Var<T>&, const Var<T>&);                                                  \
    template Var<T> scale(const Var<T>&, T);                                                            \
    template Var<T> linear(const Var<T>&, const Var<T>&);                                               \
    template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                \
    template Var<T> softmax_rows(const Var<T>&);                                                        \
    template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);                    \
    template Var<T> gelu(const Var<T>&);                                                                \
    template Var<T> depthwise_conv2d(const Var<T>&, const Var<T>&);                                     \
    template Var<T> gather_rows(const Var<T>&, std::span<const std::size_t>);                           \
    template Var<T> gather(const Var<T>&, std::span<const std::size_t>, Shape);                         \
    template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);                                \
    template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                                \
    template Var<T> concat_rows(const std::vector<Var<T>>&);                                            \
    template Var<T> concat_cols(const std::vector<Var<T>>&);                                            \
    template Var<T> reshape(const Var<T>&, Shape);                                                      \
    template Var<T> avg_pool_grid(const Var<T>&, std::size_t, std::size_t, std::size_t);                \
    template Var<T> mean_rows(const Var<T>&);                                                           \
    template Var<T> patchify(const Var<T>&, std::size_t);                                               \
    template Var<T> sum(const Var<T>&);                                                                 \
    template Var<T> weighted_sum(const Var<T>&, const BasicTensor<T>&);

GGT_INSTANTIATE_AUTOGRAD(double)
GGT_INSTANTIATE_AUTOGRAD(float)

} // namespace ggt
