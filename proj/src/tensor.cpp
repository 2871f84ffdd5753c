#include "dmn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace dmn {

namespace {

thread_local bool t_grad_enabled = true;
std::atomic<std::uint64_t> g_backward_gen{0};
std::atomic<std::uint64_t> g_relu_boundary{0};

std::size_t numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void validate_shape(const std::vector<std::size_t>& shape) {
    for (std::size_t d : shape) {
        if (d == 0) {
            throw DimensionError("tensor shape must have positive dimensions, got " +
                                 shape_to_string(shape));
        }
    }
}

std::shared_ptr<TensorNode> alloc_node(std::vector<std::size_t> shape) {
    validate_shape(shape);
    auto n = std::make_shared<TensorNode>();
    n->value.assign(numel(shape), 0.0);
    n->shape = std::move(shape);
    return n;
}

Tensor wrap(std::shared_ptr<TensorNode> n);

// Current-pass gradient buffer for a node, zeroed on first touch per pass.
std::vector<double>& scratch_for(TensorNode& n, std::uint64_t gen) {
    if (n.scratch_gen != gen) {
        n.scratch.assign(n.size(), 0.0);
        n.scratch_gen = gen;
    }
    return n.scratch;
}

} // namespace

Tensor wrap_node(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

namespace {

Tensor wrap(std::shared_ptr<TensorNode> n) { return wrap_node(std::move(n)); }

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor operand");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch: " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    }
}

bool tracking(const Tensor& a) { return t_grad_enabled && a.requires_grad(); }

} // namespace

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return "scalar";
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

// --- Tensor handle ------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto n = alloc_node(std::move(shape));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double fill, bool requires_grad) {
    auto n = alloc_node(std::move(shape));
    std::fill(n->value.begin(), n->value.end(), fill);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_vector(std::vector<std::size_t> shape, std::vector<double> data,
                           bool requires_grad) {
    validate_shape(shape);
    if (numel(shape) != data.size()) {
        throw DimensionError("from_vector: shape " + shape_to_string(shape) + " expects " +
                             std::to_string(numel(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_vector({1}, {v}, requires_grad);
}

Tensor Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
    auto n = alloc_node(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : n->value) v = dist(rng);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

const std::vector<std::size_t>& Tensor::shape() const {
    require_defined(*this, "shape");
    return node_->shape;
}

std::size_t Tensor::size() const {
    require_defined(*this, "size");
    return node_->size();
}

const std::vector<double>& Tensor::value() const {
    require_defined(*this, "value");
    return node_->value;
}

std::vector<double>& Tensor::value() {
    require_defined(*this, "value");
    return node_->value;
}

const std::vector<double>& Tensor::grad() const {
    require_defined(*this, "grad");
    if (node_->grad.size() != node_->size()) node_->grad.assign(node_->size(), 0.0);
    return node_->grad;
}

bool Tensor::requires_grad() const {
    require_defined(*this, "requires_grad");
    return node_->requires_grad;
}

void Tensor::set_requires_grad(bool rg) {
    require_defined(*this, "set_requires_grad");
    node_->requires_grad = rg;
}

void Tensor::zero_grad() {
    require_defined(*this, "zero_grad");
    node_->grad.assign(node_->size(), 0.0);
}

double Tensor::item() const {
    require_defined(*this, "item");
    if (node_->size() != 1) {
        throw ContractError("item: tensor holds " + std::to_string(node_->size()) +
                            " elements, expected exactly one (shape " +
                            shape_to_string(node_->shape) + ")");
    }
    return node_->value[0];
}

// --- grad mode ----------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

std::uint64_t relu_boundary_hits() { return g_relu_boundary.load(std::memory_order_relaxed); }
void reset_relu_boundary_hits() { g_relu_boundary.store(0, std::memory_order_relaxed); }

// --- op helpers -----------------------------------------------------------

namespace {

// Attach reverse-mode bookkeeping to `out` when any input is tracked.
void attach(const std::shared_ptr<TensorNode>& out, std::vector<std::shared_ptr<TensorNode>> parents,
            std::function<void(TensorNode&, std::uint64_t)> fn) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward_fn = std::move(fn);
}

} // namespace

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul: expects two 2-D tensors, got " + shape_to_string(a.shape()) +
                             " and " + shape_to_string(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions disagree: " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    }
    auto out = alloc_node({m, n});
    const double* av = a.value().data();
    const double* bv = b.value().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = bv + kk * n;
            double* orow = ov + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    if (tracking(a) || tracking(b)) {
        TensorNode* an = a.node().get();
        TensorNode* bn = b.node().get();
        attach(out, {a.node(), b.node()}, [an, bn, m, k, n](TensorNode& self, std::uint64_t gen) {
            const double* g = self.scratch.data();
            if (an->requires_grad) {
                double* da = scratch_for(*an, gen).data();
                const double* bv2 = bn->value.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = g + i * n;
                        const double* brow = bv2 + kk * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        da[i * k + kk] += acc;
                    }
            }
            if (bn->requires_grad) {
                double* db = scratch_for(*bn, gen).data();
                const double* av2 = an->value.data();
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aik = av2[i * k + kk];
                        if (aik == 0.0) continue;
                        const double* grow = g + i * n;
                        double* drow = db + kk * n;
                        for (std::size_t j = 0; j < n; ++j) drow[j] += aik * grow[j];
                    }
            }
        });
    }
    return wrap(out);
}

Tensor matvec(const Tensor& a, const Tensor& x) {
    require_defined(a, "matvec");
    require_defined(x, "matvec");
    if (a.rank() != 2 || x.rank() != 1) {
        throw DimensionError("matvec: expects a 2-D matrix and a 1-D vector, got " +
                             shape_to_string(a.shape()) + " and " + shape_to_string(x.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    if (k != x.shape()[0]) {
        throw DimensionError("matvec: inner dimensions disagree: " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(x.shape()));
    }
    auto out = alloc_node({m});
    const double* av = a.value().data();
    const double* xv = x.value().data();
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* arow = av + i * k;
        for (std::size_t j = 0; j < k; ++j) acc += arow[j] * xv[j];
        out->value[i] = acc;
    }
    if (tracking(a) || tracking(x)) {
        TensorNode* an = a.node().get();
        TensorNode* xn = x.node().get();
        attach(out, {a.node(), x.node()}, [an, xn, m, k](TensorNode& self, std::uint64_t gen) {
            const double* g = self.scratch.data();
            if (an->requires_grad) {
                double* da = scratch_for(*an, gen).data();
                const double* xv2 = xn->value.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double gi = g[i];
                    if (gi == 0.0) continue;
                    double* drow = da + i * k;
                    for (std::size_t j = 0; j < k; ++j) drow[j] += gi * xv2[j];
                }
            }
            if (xn->requires_grad) {
                double* dx = scratch_for(*xn, gen).data();
                const double* av2 = an->value.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double gi = g[i];
                    if (gi == 0.0) continue;
                    const double* arow = av2 + i * k;
                    for (std::size_t j = 0; j < k; ++j) dx[j] += gi * arow[j];
                }
            }
        });
    }
    return wrap(out);
}

Tensor transpose(const Tensor& a) {
    require_defined(a, "transpose");
    if (a.rank() != 2) {
        throw DimensionError("transpose: expects a 2-D tensor, got " + shape_to_string(a.shape()));
    }
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    auto out = alloc_node({n, m});
    const double* av = a.value().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->value[j * m + i] = av[i * n + j];
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, m, n](TensorNode& self, std::uint64_t gen) {
            double* da = scratch_for(*an, gen).data();
            const double* g = self.scratch.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j * m + i];
        });
    }
    return wrap(out);
}

// --- elementwise ------------------------------------------------------------

namespace {

Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b, double bsign) {
    require_defined(a, name);
    require_defined(b, name);
    require_same_shape(name, a, b);
    auto out = alloc_node(a.shape());
    const std::size_t n = out->size();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = a.value()[i] + bsign * b.value()[i];
    if (tracking(a) || tracking(b)) {
        TensorNode* an = a.node().get();
        TensorNode* bn = b.node().get();
        attach(out, {a.node(), b.node()}, [an, bn, bsign](TensorNode& self, std::uint64_t gen) {
            const auto& g = self.scratch;
            if (an->requires_grad) {
                auto& da = scratch_for(*an, gen);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (bn->requires_grad) {
                auto& db = scratch_for(*bn, gen);
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += bsign * g[i];
            }
        });
    }
    return wrap(out);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise("sub", a, b, -1.0); }

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_defined(a, "hadamard");
    require_defined(b, "hadamard");
    require_same_shape("hadamard", a, b);
    auto out = alloc_node(a.shape());
    const std::size_t n = out->size();
    for (std::size_t i = 0; i < n; ++i) out->value[i] = a.value()[i] * b.value()[i];
    if (tracking(a) || tracking(b)) {
        TensorNode* an = a.node().get();
        TensorNode* bn = b.node().get();
        attach(out, {a.node(), b.node()}, [an, bn](TensorNode& self, std::uint64_t gen) {
            const auto& g = self.scratch;
            if (an->requires_grad) {
                auto& da = scratch_for(*an, gen);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                auto& db = scratch_for(*bn, gen);
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * an->value[i];
            }
        });
    }
    return wrap(out);
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
    require_defined(a, "scale");
    auto out = alloc_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = c * a.value()[i];
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, c](TensorNode& self, std::uint64_t gen) {
            auto& da = scratch_for(*an, gen);
            const auto& g = self.scratch;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += c * g[i];
        });
    }
    return wrap(out);
}

Tensor add_scalar(const Tensor& a, double c) {
    require_defined(a, "add_scalar");
    auto out = alloc_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a.value()[i] + c;
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an](TensorNode& self, std::uint64_t gen) {
            auto& da = scratch_for(*an, gen);
            const auto& g = self.scratch;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        });
    }
    return wrap(out);
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
    require_defined(a, "scale_by");
    require_defined(s, "scale_by");
    if (s.size() != 1) {
        throw DimensionError("scale_by: scale must hold a single element, got shape " +
                             shape_to_string(s.shape()));
    }
    const double sv = s.value()[0];
    auto out = alloc_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = sv * a.value()[i];
    if (tracking(a) || tracking(s)) {
        TensorNode* an = a.node().get();
        TensorNode* sn = s.node().get();
        attach(out, {a.node(), s.node()}, [an, sn, sv](TensorNode& self, std::uint64_t gen) {
            const auto& g = self.scratch;
            if (an->requires_grad) {
                auto& da = scratch_for(*an, gen);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += sv * g[i];
            }
            if (sn->requires_grad) {
                auto& ds = scratch_for(*sn, gen);
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * an->value[i];
                ds[0] += acc;
            }
        });
    }
    return wrap(out);
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const char* name, const Tensor& a, Fwd fwd, Bwd bwd_from_out_and_in) {
    require_defined(a, name);
    auto out = alloc_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = fwd(a.value()[i]);
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()},
               [an, bwd_from_out_and_in](TensorNode& self, std::uint64_t gen) {
                   auto& da = scratch_for(*an, gen);
                   const auto& g = self.scratch;
                   for (std::size_t i = 0; i < g.size(); ++i)
                       da[i] += g[i] * bwd_from_out_and_in(self.value[i], an->value[i]);
               });
    }
    return wrap(out);
}

} // namespace

Tensor tanh(const Tensor& a) {
    return unary_elementwise(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double y, double) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_elementwise(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double y, double) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    require_defined(a, "relu");
    std::uint64_t near = 0;
    for (double v : a.value())
        if (std::abs(v) <= kReluBoundaryEps) ++near;
    if (near) g_relu_boundary.fetch_add(near, std::memory_order_relaxed);
    return unary_elementwise(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary_elementwise(
        "exp", a, [](double x) { return std::exp(x); }, [](double y, double) { return y; });
}

Tensor log(const Tensor& a) {
    require_defined(a, "log");
    for (double v : a.value()) {
        if (!(v > 0.0)) {
            throw DomainError("log: non-positive input value " + std::to_string(v));
        }
    }
    return unary_elementwise(
        "log", a, [](double x) { return std::log(x); },
        [](double, double x) { return 1.0 / x; });
}

// --- softmax ------------------------------------------------------------

namespace {

struct SliceIter {
    std::size_t count; // number of independent slices
    std::size_t len;   // elements per slice
    std::size_t step;  // stride between consecutive slice elements
    std::size_t base;  // offset of slice s is base_of(s)
    bool columnwise;
    std::size_t offset_of(std::size_t s) const { return columnwise ? s : s * len; }
};

SliceIter softmax_slices(const Tensor& a, int axis, const char* name) {
    if (a.rank() == 1) {
        if (axis != 0) {
            throw DimensionError(std::string(name) + ": axis " + std::to_string(axis) +
                                 " invalid for 1-D tensor");
        }
        return {1, a.shape()[0], 1, 0, false};
    }
    if (a.rank() == 2) {
        const std::size_t m = a.shape()[0], n = a.shape()[1];
        if (axis == 1) return {m, n, 1, 0, false};
        if (axis == 0) return {n, m, n, 0, true};
        throw DimensionError(std::string(name) + ": axis " + std::to_string(axis) +
                             " invalid for 2-D tensor");
    }
    throw DimensionError(std::string(name) + ": expects a 1-D or 2-D tensor, got " +
                         shape_to_string(a.shape()));
}

} // namespace

Tensor softmax(const Tensor& a, int axis) {
    require_defined(a, "softmax");
    const SliceIter it = softmax_slices(a, axis, "softmax");
    auto out = alloc_node(a.shape());
    const double* av = a.value().data();
    double* ov = out->value.data();
    for (std::size_t s = 0; s < it.count; ++s) {
        const std::size_t off = it.offset_of(s);
        double mx = av[off];
        for (std::size_t i = 1; i < it.len; ++i) mx = std::max(mx, av[off + i * it.step]);
        double z = 0.0;
        for (std::size_t i = 0; i < it.len; ++i) {
            const double e = std::exp(av[off + i * it.step] - mx);
            ov[off + i * it.step] = e;
            z += e;
        }
        for (std::size_t i = 0; i < it.len; ++i) ov[off + i * it.step] /= z;
    }
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, it](TensorNode& self, std::uint64_t gen) {
            double* da = scratch_for(*an, gen).data();
            const double* g = self.scratch.data();
            const double* y = self.value.data();
            for (std::size_t s = 0; s < it.count; ++s) {
                const std::size_t off = it.offset_of(s);
                double dot = 0.0;
                for (std::size_t i = 0; i < it.len; ++i) {
                    const std::size_t k = off + i * it.step;
                    dot += g[k] * y[k];
                }
                for (std::size_t i = 0; i < it.len; ++i) {
                    const std::size_t k = off + i * it.step;
                    da[k] += y[k] * (g[k] - dot);
                }
            }
        });
    }
    return wrap(out);
}

Tensor log_softmax(const Tensor& a) {
    require_defined(a, "log_softmax");
    if (a.rank() != 1) {
        throw DimensionError("log_softmax: expects a 1-D tensor, got " +
                             shape_to_string(a.shape()));
    }
    const std::size_t n = a.shape()[0];
    auto out = alloc_node(a.shape());
    const double* av = a.value().data();
    double mx = av[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, av[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(av[i] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < n; ++i) out->value[i] = av[i] - lse;
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, n](TensorNode& self, std::uint64_t gen) {
            double* da = scratch_for(*an, gen).data();
            const double* g = self.scratch.data();
            const double* y = self.value.data();
            double gsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) gsum += g[i];
            for (std::size_t i = 0; i < n; ++i) da[i] += g[i] - std::exp(y[i]) * gsum;
        });
    }
    return wrap(out);
}

// --- structural ops -------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw InputError("concat: no parts given");
    for (const Tensor& p : parts) require_defined(p, "concat");
    const std::size_t rank = parts[0].rank();
    if (rank != 1 && rank != 2) {
        throw DimensionError("concat: expects 1-D or 2-D parts, got " +
                             shape_to_string(parts[0].shape()));
    }
    if (axis < 0 || static_cast<std::size_t>(axis) >= rank) {
        throw DimensionError("concat: axis " + std::to_string(axis) + " invalid for " +
                             std::to_string(rank) + "-D parts");
    }
    for (const Tensor& p : parts) {
        if (p.rank() != rank) {
            throw DimensionError("concat: rank mismatch: " + shape_to_string(parts[0].shape()) +
                                 " vs " + shape_to_string(p.shape()));
        }
        for (std::size_t d = 0; d < rank; ++d) {
            if (d != static_cast<std::size_t>(axis) && p.shape()[d] != parts[0].shape()[d]) {
                throw DimensionError("concat: shapes disagree off the concat axis: " +
                                     shape_to_string(parts[0].shape()) + " vs " +
                                     shape_to_string(p.shape()));
            }
        }
    }

    std::vector<std::size_t> out_shape = parts[0].shape();
    out_shape[axis] = 0;
    for (const Tensor& p : parts) out_shape[axis] += p.shape()[axis];
    auto out = alloc_node(out_shape);

    // Per-part placement: (dst offset, dst row stride != part row stride only
    // for axis-1 concatenation of matrices).
    struct Placement {
        std::size_t dst_off, rows, cols, dst_stride;
    };
    std::vector<Placement> places;
    places.reserve(parts.size());
    if (rank == 1 || axis == 0) {
        std::size_t off = 0;
        for (const Tensor& p : parts) {
            places.push_back({off, 1, p.size(), p.size()});
            off += p.size();
        }
    } else { // rank 2, axis 1
        const std::size_t m = out_shape[0], total_n = out_shape[1];
        std::size_t col = 0;
        for (const Tensor& p : parts) {
            places.push_back({col, m, p.shape()[1], total_n});
            col += p.shape()[1];
        }
    }
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Placement& pl = places[pi];
        const double* src = parts[pi].value().data();
        for (std::size_t r = 0; r < pl.rows; ++r)
            for (std::size_t c = 0; c < pl.cols; ++c)
                out->value[pl.dst_off + r * pl.dst_stride + c] = src[r * pl.cols + c];
    }

    bool any = false;
    for (const Tensor& p : parts) any = any || tracking(p);
    if (any) {
        std::vector<std::shared_ptr<TensorNode>> parent_nodes;
        parent_nodes.reserve(parts.size());
        for (const Tensor& p : parts) parent_nodes.push_back(p.node());
        std::vector<TensorNode*> raw;
        raw.reserve(parts.size());
        for (auto& p : parent_nodes) raw.push_back(p.get());
        attach(out, std::move(parent_nodes),
               [raw, places](TensorNode& self, std::uint64_t gen) {
                   const double* g = self.scratch.data();
                   for (std::size_t pi = 0; pi < raw.size(); ++pi) {
                       if (!raw[pi]->requires_grad) continue;
                       double* dp = scratch_for(*raw[pi], gen).data();
                       const Placement& pl = places[pi];
                       for (std::size_t r = 0; r < pl.rows; ++r)
                           for (std::size_t c = 0; c < pl.cols; ++c)
                               dp[r * pl.cols + c] += g[pl.dst_off + r * pl.dst_stride + c];
                   }
               });
    }
    return wrap(out);
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    require_defined(a, "reshape");
    validate_shape(shape);
    if (numel(shape) != a.size()) {
        throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                             shape_to_string(shape) + " (element counts differ)");
    }
    auto out = std::make_shared<TensorNode>();
    out->shape = std::move(shape);
    out->value = a.value();
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an](TensorNode& self, std::uint64_t gen) {
            auto& da = scratch_for(*an, gen);
            const auto& g = self.scratch;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        });
    }
    return wrap(out);
}

Tensor row(const Tensor& a, std::size_t i) {
    require_defined(a, "row");
    if (a.rank() != 2) {
        throw DimensionError("row: expects a 2-D tensor, got " + shape_to_string(a.shape()));
    }
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    if (i >= m) {
        throw InputError("row: index " + std::to_string(i) + " out of range for " +
                         shape_to_string(a.shape()));
    }
    auto out = alloc_node({n});
    const double* src = a.value().data() + i * n;
    std::copy(src, src + n, out->value.begin());
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, i, n](TensorNode& self, std::uint64_t gen) {
            double* da = scratch_for(*an, gen).data() + i * n;
            const double* g = self.scratch.data();
            for (std::size_t j = 0; j < n; ++j) da[j] += g[j];
        });
    }
    return wrap(out);
}

Tensor slice(const Tensor& a, std::size_t offset, std::size_t len) {
    require_defined(a, "slice");
    if (a.rank() != 1) {
        throw DimensionError("slice: expects a 1-D tensor, got " + shape_to_string(a.shape()));
    }
    if (len == 0) throw DimensionError("slice: zero-length slice requested");
    if (offset + len > a.size()) {
        throw InputError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + len) + ") out of bounds for " +
                         shape_to_string(a.shape()));
    }
    auto out = alloc_node({len});
    std::copy(a.value().begin() + offset, a.value().begin() + offset + len, out->value.begin());
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, offset](TensorNode& self, std::uint64_t gen) {
            double* da = scratch_for(*an, gen).data() + offset;
            const double* g = self.scratch.data();
            for (std::size_t j = 0; j < self.size(); ++j) da[j] += g[j];
        });
    }
    return wrap(out);
}

Tensor pick(const Tensor& a, std::size_t flat_index) {
    require_defined(a, "pick");
    if (flat_index >= a.size()) {
        throw InputError("pick: index " + std::to_string(flat_index) + " out of range for " +
                         shape_to_string(a.shape()));
    }
    auto out = alloc_node({1});
    out->value[0] = a.value()[flat_index];
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, flat_index](TensorNode& self, std::uint64_t gen) {
            scratch_for(*an, gen)[flat_index] += self.scratch[0];
        });
    }
    return wrap(out);
}

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    auto out = alloc_node({1});
    double acc = 0.0;
    for (double v : a.value()) acc += v;
    out->value[0] = acc;
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an](TensorNode& self, std::uint64_t gen) {
            auto& da = scratch_for(*an, gen);
            const double g = self.scratch[0];
            for (double& d : da) d += g;
        });
    }
    return wrap(out);
}

Tensor sum_axis(const Tensor& a, int axis) {
    require_defined(a, "sum_axis");
    if (a.rank() != 2) {
        throw DimensionError("sum_axis: expects a 2-D tensor, got " + shape_to_string(a.shape()));
    }
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    if (axis != 0 && axis != 1) {
        throw DimensionError("sum_axis: axis " + std::to_string(axis) + " invalid for 2-D tensor");
    }
    auto out = alloc_node({axis == 0 ? n : m});
    const double* av = a.value().data();
    if (axis == 0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out->value[j] += av[i * n + j];
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += av[i * n + j];
            out->value[i] = acc;
        }
    }
    if (tracking(a)) {
        TensorNode* an = a.node().get();
        attach(out, {a.node()}, [an, m, n, axis](TensorNode& self, std::uint64_t gen) {
            double* da = scratch_for(*an, gen).data();
            const double* g = self.scratch.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[axis == 0 ? j : i];
        });
    }
    return wrap(out);
}

// --- backward ----------------------------------------------------------

Tape Tape::record(const Tensor& root) {
    if (!root.defined()) throw ContractError("tape: root tensor is undefined");
    Tape tape;
    tape.root_ = root.node();
    if (!root.node()->requires_grad) return tape;

    // Iterative post-order traversal over requires_grad ancestors; emits every
    // node after all of its inputs.
    std::vector<std::pair<TensorNode*, bool>> stack;
    std::unordered_set<TensorNode*> seen;
    stack.push_back({root.node().get(), false});
    while (!stack.empty()) {
        auto [n, expanded] = stack.back();
        stack.pop_back();
        if (expanded) {
            tape.order_.push_back(n);
            continue;
        }
        if (seen.count(n)) continue;
        seen.insert(n);
        stack.push_back({n, true});
        for (const auto& p : n->parents) {
            if (p->requires_grad && !seen.count(p.get())) stack.push_back({p.get(), false});
        }
    }
    return tape;
}

void Tape::replay_backward() {
    if (order_.empty()) return;
    const std::uint64_t gen = ++g_backward_gen;
    auto& seed = scratch_for(*root_, gen);
    std::fill(seed.begin(), seed.end(), 1.0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        TensorNode* n = *it;
        if (n->scratch_gen != gen) continue; // no gradient reached this node
        if (n->backward_fn) n->backward_fn(*n, gen);
        if (n->grad.size() != n->size()) n->grad.assign(n->size(), 0.0);
        for (std::size_t i = 0; i < n->scratch.size(); ++i) n->grad[i] += n->scratch[i];
    }
}

void backward(const Tensor& root) {
    if (!root.defined()) throw ContractError("backward: root tensor is undefined");
    if (root.size() != 1) {
        throw ContractError("backward: root must hold a single element, got shape " +
                            shape_to_string(root.shape()));
    }
    if (!root.node()->requires_grad) return;
    Tape tape = Tape::record(root);
    tape.replay_backward();
}

} // namespace dmn
