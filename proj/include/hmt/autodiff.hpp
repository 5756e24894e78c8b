#pragma once

// Tape-free reverse-mode differentiation over dense row-major matrices.
//
// Every value is a `Var`, a shared handle to a graph `Node`. Nodes record the
// parents they were computed from and a closure that pushes the node's
// gradient back into those parents. Node ids grow monotonically with creation
// order, so sorting reachable nodes by id descending is a valid reverse
// topological order; this also fixes the accumulation order and makes
// gradients bitwise reproducible.

#include "hmt/tensor.hpp"

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace hmt::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Mat value;
    Mat grad;  // empty until first accumulation
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;

    // Allocates a zero gradient of the value's shape on first use.
    Mat& ensure_grad();
};

class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    bool defined() const { return static_cast<bool>(node_); }
    const Mat& value() const { return node_->value; }
    // Mutable access for optimizers and in-place parameter edits between steps.
    Mat& mutable_value() { return node_->value; }
    const Mat& grad() const;
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double item() const;

    void zero_grad();
    Node* node() const { return node_.get(); }
    const NodePtr& ptr() const { return node_; }

private:
    NodePtr node_;
};

// Leaves.
Var constant(Mat value);
Var parameter(Mat value);
Var scalar(double v);

// Builds an interior node. `backward` receives the node after its gradient
// has been fully accumulated and must add into the parents' gradients. When no
// parent requires a gradient the closure is dropped.
Var make_op(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward);

// Runs reverse accumulation from a 1x1 loss. Returns the requires_grad leaves
// reached, in ascending id order; their gradients are left on the nodes.
std::vector<Var> backward(const Var& loss);

// --- elementwise ---------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
Var abs(const Var& a);
Var exp(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// --- broadcasting --------------------------------------------------------
// a: n x k, row: 1 x k
Var add_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);
// a: n x k, col: n x 1
Var mul_col(const Var& a, const Var& col);
// row: 1 x k -> n x k
Var broadcast_rows(const Var& row, Eigen::Index n);

// --- linear algebra and reductions ---------------------------------------
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
// Softmax over all entries of a vector-shaped value.
Var softmax(const Var& a);

// --- structural ----------------------------------------------------------
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
// out[i] = a[i - k] with zeros shifted in; k may be negative.
Var shift_rows(const Var& a, Eigen::Index k);
// Each row divided by its Euclidean norm. Throws NumericalError when a row
// norm falls below `min_norm`.
Var normalize_rows(const Var& a, double min_norm = 1e-12);

}  // namespace hmt::ad
