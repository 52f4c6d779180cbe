#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmsc {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles. Image tensors use NHWC layout.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// NHWC element access for rank-4 tensors.
    double& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c);
    double at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const;

    double item() const;
    Tensor reshaped(Shape shape) const;
    void fill(double v);

private:
    Shape shape_;
    std::vector<double> values_;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// A vertex of the reverse-mode tape. Leaves with `requires_grad` are
/// parameters; interior nodes carry a closure that pushes their gradient
/// into their parents.
struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;
    std::string name;

    Tensor& ensure_grad();
};

/// Handle onto a tape node. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    static Var constant(Tensor value);
    static Var parameter(Tensor value, std::string name = {});

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_->requires_grad; }
    const std::string& name() const { return node_->name; }

    /// Gradient after `backward`; absent when the node was never reached.
    const std::optional<Tensor>& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.reset(); }

    const NodePtr& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

/// Builds an interior node. `backward_fn` receives the node after its grad
/// has been populated and must accumulate into parents via `ensure_grad`.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Reverse sweep from a scalar loss. Gradients of every reachable node are
/// reset before propagation, so repeated calls do not accumulate.
void backward(const Var& loss);

// Elementwise and reduction ops.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var sum(const Var& a);
Var frobenius_sq(const Var& a);
Var frobenius(const Var& a);
Var reshape(const Var& a, Shape shape);

// Rank-2 linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Spatial ops on NHWC tensors with same-padding.
std::size_t conv_output_size(std::size_t in, std::size_t stride);
Shape conv2d_output_shape(const Shape& input, const Shape& kernel, std::size_t stride);
Shape deconv2d_output_shape(const Shape& input, const Shape& kernel, std::size_t stride);

/// kernel is [kh, kw, din, dout]; output spatial size is ceil(in / stride).
Var conv2d(const Var& input, const Var& kernel, std::size_t stride);
/// Transposed convolution; kernel is [kh, kw, dout, din] and output spatial
/// size is in * stride, so it exactly inverts the matching conv2d shape.
Var deconv2d(const Var& input, const Var& kernel, std::size_t stride);

// Raw kernels, shared with tests and the ops above.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::size_t stride);
Tensor deconv2d_forward(const Tensor& input, const Tensor& kernel, std::size_t stride);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace dmsc
