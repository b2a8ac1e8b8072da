#pragma once

// Reverse-mode differentiation core. The operator set is exactly what the
// model and losses need: dense matmul, broadcast add, elementwise sin/cos,
// Hadamard product, relu, sigmoid, reductions, column concat/slice, and a
// gather op for hash-grid lookups. Everything is double precision.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sasnet::ad {

using Mat = Eigen::MatrixXd;

struct Node;
using Tensor = std::shared_ptr<Node>;

struct Node {
    Mat val;
    Mat grad;                    // lazily allocated, same shape as val
    bool requires_grad = false;
    std::string name;            // nonempty for trainable parameters
    std::vector<Tensor> parents;
    std::function<void(Node&)> backward_fn;  // scatters grad into parents

    long rows() const { return val.rows(); }
    long cols() const { return val.cols(); }

    void ensure_grad() {
        if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
    }
};

inline Tensor make_leaf(Mat v, bool requires_grad = false, std::string name = {}) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
}

inline Tensor constant(Mat v) { return make_leaf(std::move(v), false); }
inline Tensor scalar(double v) { return make_leaf(Mat::Constant(1, 1, v), false); }

[[noreturn]] inline void shape_error(const char* op, const Node& a, const Node& b) {
    throw std::invalid_argument(std::string("shape mismatch in ") + op + ": (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                ") vs (" + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

namespace detail {

inline Tensor make_op(Mat v, std::vector<Tensor> parents,
                      std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    for (auto& p : parents)
        if (p->requires_grad) { n->requires_grad = true; break; }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

}  // namespace detail

// --- binary ops -------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a->cols() != b->rows()) shape_error("matmul", *a, *b);
    return detail::make_op(a->val * b->val, {a, b}, [a, b](Node& out) {
        if (a->requires_grad) {
            a->ensure_grad();
            a->grad.noalias() += out.grad * b->val.transpose();
        }
        if (b->requires_grad) {
            b->ensure_grad();
            b->grad.noalias() += a->val.transpose() * out.grad;
        }
    });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a->rows() != b->rows() || a->cols() != b->cols()) shape_error("add", *a, *b);
    return detail::make_op(a->val + b->val, {a, b}, [a, b](Node& out) {
        if (a->requires_grad) { a->ensure_grad(); a->grad += out.grad; }
        if (b->requires_grad) { b->ensure_grad(); b->grad += out.grad; }
    });
}

// a: N x m, b: 1 x m broadcast over rows
inline Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    if (b->rows() != 1 || a->cols() != b->cols()) shape_error("add_rowvec", *a, *b);
    Mat v = a->val.rowwise() + b->val.row(0);
    return detail::make_op(std::move(v), {a, b}, [a, b](Node& out) {
        if (a->requires_grad) { a->ensure_grad(); a->grad += out.grad; }
        if (b->requires_grad) {
            b->ensure_grad();
            b->grad.row(0) += out.grad.colwise().sum();
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    if (a->rows() != b->rows() || a->cols() != b->cols()) shape_error("sub", *a, *b);
    return detail::make_op(a->val - b->val, {a, b}, [a, b](Node& out) {
        if (a->requires_grad) { a->ensure_grad(); a->grad += out.grad; }
        if (b->requires_grad) { b->ensure_grad(); b->grad -= out.grad; }
    });
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a->rows() != b->rows() || a->cols() != b->cols()) shape_error("hadamard", *a, *b);
    return detail::make_op(a->val.cwiseProduct(b->val), {a, b}, [a, b](Node& out) {
        if (a->requires_grad) {
            a->ensure_grad();
            a->grad += out.grad.cwiseProduct(b->val);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            b->grad += out.grad.cwiseProduct(a->val);
        }
    });
}

// --- elementwise unary ------------------------------------------------------

inline Tensor sin_(const Tensor& a) {
    return detail::make_op(a->val.array().sin().matrix(), {a}, [a](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.array() += out.grad.array() * a->val.array().cos();
    });
}

inline Tensor cos_(const Tensor& a) {
    return detail::make_op(a->val.array().cos().matrix(), {a}, [a](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.array() -= out.grad.array() * a->val.array().sin();
    });
}

// max(x, 0); doubles as the hinge in the sparsity loss
inline Tensor relu(const Tensor& a) {
    return detail::make_op(a->val.cwiseMax(0.0), {a}, [a](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.array() += out.grad.array() * (a->val.array() > 0.0).cast<double>();
    });
}

inline Tensor sigmoid(const Tensor& a) {
    Mat s = (1.0 / (1.0 + (-a->val.array()).exp())).matrix();
    return detail::make_op(s, {a}, [a, s](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.array() += out.grad.array() * s.array() * (1.0 - s.array());
    });
}

inline Tensor square(const Tensor& a) {
    return detail::make_op(a->val.cwiseProduct(a->val), {a}, [a](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.array() += 2.0 * out.grad.array() * a->val.array();
    });
}

inline Tensor scale(const Tensor& a, double c) {
    return detail::make_op(a->val * c, {a}, [a, c](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad += c * out.grad;
    });
}

inline Tensor add_const(const Tensor& a, double c) {
    return detail::make_op(a->val.array() + c, {a}, [a](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad += out.grad;
    });
}

// --- reductions -------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    return detail::make_op(Mat::Constant(1, 1, a->val.sum()), {a}, [a](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.array() += out.grad(0, 0);
    });
}

inline Tensor mean(const Tensor& a) {
    const double n = static_cast<double>(a->val.size());
    return detail::make_op(Mat::Constant(1, 1, a->val.sum() / n), {a}, [a, n](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.array() += out.grad(0, 0) / n;
    });
}

inline Tensor rowsum(const Tensor& a) {
    return detail::make_op(a->val.rowwise().sum(), {a}, [a](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.colwise() += out.grad.col(0);
    });
}

// --- structural ops ---------------------------------------------------------

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    long rows = parts[0]->rows(), cols = 0;
    for (auto& p : parts) {
        if (p->rows() != rows) shape_error("concat_cols", *parts[0], *p);
        cols += p->cols();
    }
    Mat v(rows, cols);
    long off = 0;
    for (auto& p : parts) {
        v.middleCols(off, p->cols()) = p->val;
        off += p->cols();
    }
    return detail::make_op(std::move(v), parts, [parts](Node& out) {
        long off = 0;
        for (auto& p : parts) {
            if (p->requires_grad) {
                p->ensure_grad();
                p->grad += out.grad.middleCols(off, p->cols());
            }
            off += p->cols();
        }
    });
}

inline Tensor slice_cols(const Tensor& a, long start, long len) {
    if (start < 0 || start + len > a->cols())
        throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of " +
                                    std::to_string(a->cols()) + " columns");
    return detail::make_op(a->val.middleCols(start, len), {a}, [a, start, len](Node& out) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        a->grad.middleCols(start, len) += out.grad;
    });
}

// Weighted gather: out.row(n) = sum_c weights(n,c) * table.row(indices(n,c)).
// Backbone of hash-grid interpolation; scatter order in backward is fixed
// (row-major over n, then c) so reductions are deterministic.
inline Tensor weighted_gather(const Tensor& table,
                              const Eigen::MatrixXi& indices,
                              const Mat& weights) {
    if (indices.rows() != weights.rows() || indices.cols() != weights.cols())
        throw std::invalid_argument("weighted_gather: index/weight arity mismatch");
    const long n = indices.rows(), c = indices.cols(), f = table->cols();
    Mat v = Mat::Zero(n, f);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < c; ++j)
            v.row(i) += weights(i, j) * table->val.row(indices(i, j));
    return detail::make_op(std::move(v), {table}, [table, indices, weights](Node& out) {
        if (!table->requires_grad) return;
        table->ensure_grad();
        for (long i = 0; i < indices.rows(); ++i)
            for (long j = 0; j < indices.cols(); ++j)
                table->grad.row(indices(i, j)) += weights(i, j) * out.grad.row(i);
    });
}

// --- backward ---------------------------------------------------------------

inline void backward(const Tensor& loss) {
    if (loss->rows() != 1 || loss->cols() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    std::to_string(loss->rows()) + "x" +
                                    std::to_string(loss->cols()));
    // reverse topological order; each node visited exactly once
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{loss.get(), 0}};
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

inline void zero_grad(const std::vector<Tensor>& params) {
    for (auto& p : params)
        if (p->grad.size() != 0) p->grad.setZero();
}

// --- Adam -------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One optimizer instance per parameter group; groups step independently.
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Tensor> params, AdamConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        for (auto& p : params_) {
            first_moment_.emplace_back(Mat::Zero(p->rows(), p->cols()));
            second_moment_.emplace_back(Mat::Zero(p->rows(), p->cols()));
        }
    }

    void step() {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
        for (size_t i = 0; i < params_.size(); ++i) {
            Node& p = *params_[i];
            p.ensure_grad();
            if (!p.grad.allFinite())
                throw std::runtime_error("Adam: non-finite gradient for parameter '" +
                                         (p.name.empty() ? std::string("<unnamed>") : p.name) +
                                         "'");
            Mat& m = first_moment_[i];
            Mat& v = second_moment_[i];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
            p.val.array() -= cfg_.learning_rate * (m.array() / bc1) /
                             ((v.array() / bc2).sqrt() + cfg_.epsilon);
        }
    }

    void zero_grad() { ad::zero_grad(params_); }

    long step_count() const { return step_count_; }
    const std::vector<Tensor>& params() const { return params_; }
    const AdamConfig& config() const { return cfg_; }
    Mat& moment1(size_t i) { return first_moment_[i]; }
    Mat& moment2(size_t i) { return second_moment_[i]; }
    void set_step_count(long s) { step_count_ = s; }

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    std::vector<Mat> first_moment_;
    std::vector<Mat> second_moment_;
    long step_count_ = 0;
};

}  // namespace sasnet::ad
