#include "hmt/autodiff.hpp"

#include "hmt/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace hmt::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

NodePtr new_node(Mat value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.value()) +
                            " vs " + shape_str(b.value()));
    }
}

// Accumulates into a parent only when it participates in differentiation.
template <typename Expr>
void accumulate(Node& parent, const Expr& g) {
    if (parent.requires_grad) parent.ensure_grad() += g;
}

}  // namespace

Mat& Node::ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
        grad = Mat::Zero(value.rows(), value.cols());
    }
    return grad;
}

const Mat& Var::grad() const {
    return node_->ensure_grad();
}

double Var::item() const {
    if (node_->value.size() != 1) {
        throw ContractError("item(): value is not scalar " + shape_str(node_->value));
    }
    return node_->value(0, 0);
}

void Var::zero_grad() {
    if (node_) node_->grad.setZero(node_->value.rows(), node_->value.cols());
}

Var constant(Mat value) { return Var(new_node(std::move(value), false)); }

Var parameter(Mat value) { return Var(new_node(std::move(value), true)); }

Var scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

Var make_op(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward) {
    const bool rg = std::any_of(parents.begin(), parents.end(),
                                [](const Var& p) { return p.requires_grad(); });
    auto n = new_node(std::move(value), rg);
    if (rg) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.ptr());
        n->backward_fn = std::move(backward);
    }
    return Var(std::move(n));
}

std::vector<Var> backward(const Var& loss) {
    if (!loss.defined() || loss.value().size() != 1) {
        throw ContractError("backward: loss must be a scalar");
    }
    if (!loss.requires_grad()) return {};

    std::vector<NodePtr> order;
    std::unordered_set<Node*> seen;
    std::vector<NodePtr> stack{loss.ptr()};
    seen.insert(loss.node());
    while (!stack.empty()) {
        NodePtr n = std::move(stack.back());
        stack.pop_back();
        for (auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        }
        order.push_back(std::move(n));
    }
    std::sort(order.begin(), order.end(),
              [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });

    loss.node()->ensure_grad()(0, 0) += 1.0;
    for (auto& n : order) {
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
    std::vector<Var> leaves;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->parents.empty()) leaves.emplace_back(*it);
    }
    return leaves;
}

// --- elementwise ---------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    return make_op(a.value() + b.value(), {a, b}, [](Node& n) {
        accumulate(*n.parents[0], n.grad);
        accumulate(*n.parents[1], n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    return make_op(a.value() - b.value(), {a, b}, [](Node& n) {
        accumulate(*n.parents[0], n.grad);
        accumulate(*n.parents[1], -n.grad);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        accumulate(pa, n.grad.cwiseProduct(pb.value));
        accumulate(pb, n.grad.cwiseProduct(pa.value));
    });
}

Var scale(const Var& a, double s) {
    return make_op(a.value() * s, {a}, [s](Node& n) { accumulate(*n.parents[0], n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
    return make_op((a.value().array() + s).matrix(), {a},
                   [](Node& n) { accumulate(*n.parents[0], n.grad); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var abs(const Var& a) {
    return make_op(a.value().cwiseAbs(), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        // sign(0) = 0: the subgradient at a tie contributes nothing.
        Mat s = p.value.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
        accumulate(p, n.grad.cwiseProduct(s));
    });
}

Var exp(const Var& a) {
    return make_op(a.value().array().exp().matrix(), {a}, [](Node& n) {
        accumulate(*n.parents[0], n.grad.cwiseProduct(n.value));
    });
}

Var relu(const Var& a) {
    return make_op(a.value().cwiseMax(0.0), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        Mat g = (p.value.array() > 0.0).select(n.grad, 0.0);
        accumulate(p, g);
    });
}

Var leaky_relu(const Var& a, double slope) {
    Mat v = (a.value().array() > 0.0).select(a.value(), a.value() * slope);
    return make_op(std::move(v), {a}, [slope](Node& n) {
        Node& p = *n.parents[0];
        Mat g = (p.value.array() > 0.0).select(n.grad, n.grad * slope);
        accumulate(p, g);
    });
}

Var sigmoid(const Var& a) {
    Mat v = a.value().unaryExpr([](double x) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    return make_op(std::move(v), {a}, [](Node& n) {
        Mat d = n.value.array() * (1.0 - n.value.array());
        accumulate(*n.parents[0], n.grad.cwiseProduct(d));
    });
}

// --- broadcasting --------------------------------------------------------

Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ContractError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                            shape_str(row.value()));
    }
    Mat v = a.value().rowwise() + row.value().row(0);
    return make_op(std::move(v), {a, row}, [](Node& n) {
        accumulate(*n.parents[0], n.grad);
        accumulate(*n.parents[1], n.grad.colwise().sum());
    });
}

Var mul_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ContractError("mul_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                            shape_str(row.value()));
    }
    Mat v = a.value().array().rowwise() * row.value().row(0).array();
    return make_op(std::move(v), {a, row}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pr = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad().array() += n.grad.array().rowwise() * pr.value.row(0).array();
        }
        if (pr.requires_grad) {
            pr.ensure_grad() += n.grad.cwiseProduct(pa.value).colwise().sum();
        }
    });
}

Var mul_col(const Var& a, const Var& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw ContractError("mul_col: expected " + std::to_string(a.rows()) + "x1 column, got " +
                            shape_str(col.value()));
    }
    Mat v = a.value().array().colwise() * col.value().col(0).array();
    return make_op(std::move(v), {a, col}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pc = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad().array() += n.grad.array().colwise() * pc.value.col(0).array();
        }
        if (pc.requires_grad) {
            pc.ensure_grad() += n.grad.cwiseProduct(pa.value).rowwise().sum();
        }
    });
}

Var broadcast_rows(const Var& row, Eigen::Index n_rows) {
    if (row.rows() != 1) throw ContractError("broadcast_rows: expected a single row");
    Mat v = row.value().replicate(n_rows, 1);
    return make_op(std::move(v), {row},
                   [](Node& n) { accumulate(*n.parents[0], n.grad.colwise().sum()); });
}

// --- linear algebra and reductions ---------------------------------------

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) {
        throw ContractError("matmul: inner dimensions differ " + shape_str(a.value()) + " * " +
                            shape_str(b.value()));
    }
    Mat v = a.value() * b.value();
    return make_op(std::move(v), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) pa.ensure_grad().noalias() += n.grad * pb.value.transpose();
        if (pb.requires_grad) pb.ensure_grad().noalias() += pa.value.transpose() * n.grad;
    });
}

Var transpose(const Var& a) {
    return make_op(a.value().transpose(), {a},
                   [](Node& n) { accumulate(*n.parents[0], n.grad.transpose()); });
}

Var sum(const Var& a) {
    Mat v(1, 1);
    v(0, 0) = a.value().sum();
    return make_op(std::move(v), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        if (p.requires_grad) p.ensure_grad().array() += n.grad(0, 0);
    });
}

Var mean(const Var& a) {
    const double count = static_cast<double>(a.value().size());
    if (count == 0) throw ContractError("mean: empty input");
    Mat v(1, 1);
    v(0, 0) = a.value().sum() / count;
    return make_op(std::move(v), {a}, [count](Node& n) {
        Node& p = *n.parents[0];
        if (p.requires_grad) p.ensure_grad().array() += n.grad(0, 0) / count;
    });
}

Var softmax(const Var& a) {
    if (a.rows() != 1 && a.cols() != 1) throw ContractError("softmax: expects a vector");
    const double m = a.value().maxCoeff();
    Mat e = (a.value().array() - m).exp().matrix();
    e /= e.sum();
    return make_op(std::move(e), {a}, [](Node& n) {
        const double dot = n.grad.cwiseProduct(n.value).sum();
        accumulate(*n.parents[0], n.value.cwiseProduct((n.grad.array() - dot).matrix()));
    });
}

// --- structural ----------------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const Eigen::Index rows = parts[0].rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ContractError("concat_cols: row count mismatch");
        cols += p.cols();
    }
    Mat v(rows, cols);
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p.cols()) = p.value();
        offsets.push_back(off);
        off += p.cols();
    }
    std::vector<Var> parents(parts.begin(), parts.end());
    return make_op(std::move(v), std::move(parents), [offsets](Node& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
            Node& p = *n.parents[i];
            accumulate(p, n.grad.middleCols(offsets[i], p.value.cols()));
        }
    });
}

Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) {
        throw ContractError("slice_cols: range out of bounds");
    }
    return make_op(a.value().middleCols(start, count), {a}, [start, count](Node& n) {
        Node& p = *n.parents[0];
        if (p.requires_grad) p.ensure_grad().middleCols(start, count) += n.grad;
    });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw ContractError("slice_rows: range out of bounds");
    }
    return make_op(a.value().middleRows(start, count), {a}, [start, count](Node& n) {
        Node& p = *n.parents[0];
        if (p.requires_grad) p.ensure_grad().middleRows(start, count) += n.grad;
    });
}

Var shift_rows(const Var& a, Eigen::Index k) {
    const Eigen::Index r = a.rows();
    Mat v = Mat::Zero(r, a.cols());
    const Eigen::Index len = std::max<Eigen::Index>(0, r - std::abs(k));
    if (len > 0) {
        if (k >= 0) v.bottomRows(len) = a.value().topRows(len);
        else v.topRows(len) = a.value().bottomRows(len);
    }
    return make_op(std::move(v), {a}, [k, len](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad || len == 0) return;
        if (k >= 0) p.ensure_grad().topRows(len) += n.grad.bottomRows(len);
        else p.ensure_grad().bottomRows(len) += n.grad.topRows(len);
    });
}

Var normalize_rows(const Var& a, double min_norm) {
    Eigen::VectorXd norms = a.value().rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        if (!(norms(i) >= min_norm)) {
            throw NumericalError("normalize_rows: degenerate row " + std::to_string(i) +
                                 " with norm " + std::to_string(norms(i)));
        }
    }
    Mat v = a.value().array().colwise() / norms.array();
    return make_op(std::move(v), {a}, [norms](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        // d(x/|x|) = (g - y (y.g)) / |x|
        Eigen::VectorXd dots = n.grad.cwiseProduct(n.value).rowwise().sum();
        Mat g = n.grad - (n.value.array().colwise() * dots.array()).matrix();
        p.ensure_grad() += (g.array().colwise() / norms.array()).matrix();
    });
}

}  // namespace hmt::ad
