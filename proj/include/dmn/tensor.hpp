#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dmn/error.hpp"

namespace dmn {

// Dense row-major tensor of doubles with reverse-mode automatic
// differentiation. Each Tensor is a shared handle to a graph node; ops
// record parent links and a backward closure only while gradients are
// enabled and at least one input requires them, so pure inference builds
// no graph at all.
//
// Gradient contract: backward(root) accumulates into .grad additively.
// Calling backward twice without zero_grad doubles the gradients; callers
// own the decision to clear.

struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad; // sized lazily, kept across backward calls
    bool requires_grad = false;

    // Reverse-mode bookkeeping. `scratch` holds the current backward pass's
    // contribution only; `scratch_gen` tags which pass it belongs to so a
    // later pass starts from zero without touching `grad`.
    std::vector<double> scratch;
    std::uint64_t scratch_gen = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&, std::uint64_t)> backward_fn;

    std::size_t size() const { return value.size(); }
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double fill, bool requires_grad = false);
    static Tensor from_vector(std::vector<std::size_t> shape, std::vector<double> data,
                              bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    // Uniform in [lo, hi) from the caller's generator; used for parameter init.
    static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi,
                          std::mt19937_64& rng, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    const std::vector<double>& value() const;
    std::vector<double>& value(); // mutable view, for optimizer/loader updates
    const std::vector<double>& grad() const;
    bool requires_grad() const;
    void set_requires_grad(bool rg);
    void zero_grad();
    double item() const; // value of a single-element tensor

    std::shared_ptr<TensorNode> node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;

    friend Tensor wrap_node(std::shared_ptr<TensorNode> n);
};

// RAII switch that disables graph recording on the current thread. Used for
// evaluation and beam search so repeated forward passes stay allocation-light.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

bool grad_enabled();

// --- ops --------------------------------------------------------------
// Binary elementwise ops require exactly equal shapes; there is no
// broadcasting anywhere. Shape violations throw DimensionError naming both
// shapes.

Tensor matmul(const Tensor& a, const Tensor& b);   // [m,k] x [k,n] -> [m,n]
Tensor matvec(const Tensor& a, const Tensor& x);   // [m,k] x [k]   -> [m]
Tensor transpose(const Tensor& a);                 // [m,n] -> [n,m]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
// Multiply every element of `a` by the single-element tensor `s`; gradient
// flows into both. This is the differentiable gate-blending primitive.
Tensor scale_by(const Tensor& a, const Tensor& s);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a); // throws DomainError on any element <= 0

// Max-subtracted softmax. 1-D tensors use axis 0. For 2-D tensors axis 0
// normalizes each column, axis 1 each row.
Tensor softmax(const Tensor& a, int axis = 0);
Tensor log_softmax(const Tensor& a); // 1-D, numerically stable

Tensor concat(const std::vector<Tensor>& parts, int axis = 0);
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
Tensor row(const Tensor& a, std::size_t i);                   // [m,n] -> [n]
Tensor slice(const Tensor& a, std::size_t offset, std::size_t len); // 1-D segment
Tensor pick(const Tensor& a, std::size_t flat_index);         // -> [1]
Tensor sum(const Tensor& a);                                  // -> [1]
Tensor sum_axis(const Tensor& a, int axis);                   // [m,n] -> [n] or [m]

inline Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
    return add(matvec(w, x), b);
}

// --- backward ----------------------------------------------------------

// Recorded traversal of the graph below a root: topological order with
// every node after its inputs. replay_backward walks it once in reverse,
// seeding the root with 1 and accumulating into .grad of every
// requires_grad participant.
class Tape {
  public:
    static Tape record(const Tensor& root);
    void replay_backward();
    std::size_t size() const { return order_.size(); }

  private:
    std::vector<TensorNode*> order_;
    std::shared_ptr<TensorNode> root_;
};

// Convenience wrapper: root must hold exactly one element (ContractError
// otherwise). Gradients accumulate; see the contract note above.
void backward(const Tensor& root);

// ReLU evaluations whose input magnitude is at most `kReluBoundaryEps` are
// counted so finite-difference checking can flag parameters whose probes
// straddle the kink instead of reporting a spurious mismatch.
inline constexpr double kReluBoundaryEps = 1e-5;
std::uint64_t relu_boundary_hits();
void reset_relu_boundary_hits();

} // namespace dmn
