// lingrad.hpp - dense matrix reverse-mode differentiation on Eigen.
//
// A Tape records every operation applied to its Vars. Values are row-major
// Eigen matrices; each node caches its forward value so backward() can be
// called any number of times without re-running the forward pass.
//
// Conventions:
//   - relu'(0) == 0
//   - log_softmax is applied per row with max subtraction
//   - row_mean maps (r x c) -> (1 x c), sum maps anything -> (1 x 1)

#ifndef STEODE_LINGRAD_HPP
#define STEODE_LINGRAD_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace steode::lingrad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TapeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class OpKind {
    leaf,
    matmul,
    hadamard,
    transpose,
    add,
    scale,
    relu,
    log_softmax,
    row_mean,
    sum,
    affine_combine,
};

inline std::string_view op_name(OpKind kind) {
    switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::hadamard: return "hadamard";
    case OpKind::transpose: return "transpose";
    case OpKind::add: return "add";
    case OpKind::scale: return "scale";
    case OpKind::relu: return "relu";
    case OpKind::log_softmax: return "log_softmax";
    case OpKind::row_mean: return "row_mean";
    case OpKind::sum: return "sum";
    case OpKind::affine_combine: return "affine_combine";
    }
    return "unknown";
}

/// Caller-chosen key under which a parameter's gradient is reported.
using ParamId = int;

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
template <typename Scalar>
class Var {
public:
    Var() = default;

    const Matrix<Scalar>& value() const { return tape_->node(id_).value; }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    std::size_t id() const { return id_; }
    Tape<Scalar>* tape() const { return tape_; }

private:
    friend class Tape<Scalar>;
    Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape<Scalar>* tape_ = nullptr;
    std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
public:
    struct Node {
        OpKind kind = OpKind::leaf;
        std::size_t lhs = 0;
        std::size_t rhs = 0;
        Scalar alpha = Scalar(1);
        Scalar beta = Scalar(0);
        bool needs_grad = false;
        int param = -1;
        Matrix<Scalar> value;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// When off, parameters are recorded as constants and backward() refuses.
    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    Var<Scalar> constant(Matrix<Scalar> value) {
        check_finite(value, OpKind::leaf);
        Node n;
        n.value = std::move(value);
        return push(std::move(n));
    }

    Var<Scalar> parameter(Matrix<Scalar> value, ParamId id) {
        check_finite(value, OpKind::leaf);
        Node n;
        n.value = std::move(value);
        n.needs_grad = grad_enabled_;
        n.param = grad_enabled_ ? id : -1;
        return push(std::move(n));
    }

    const Node& node(std::size_t id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    Var<Scalar> record(OpKind kind, Matrix<Scalar> value, std::size_t lhs, std::size_t rhs,
                       Scalar alpha = Scalar(1), Scalar beta = Scalar(0)) {
        check_finite(value, kind);
        Node n;
        n.kind = kind;
        n.lhs = lhs;
        n.rhs = rhs;
        n.alpha = alpha;
        n.beta = beta;
        n.needs_grad = nodes_[lhs].needs_grad || nodes_[rhs].needs_grad;
        n.value = std::move(value);
        return push(std::move(n));
    }

    /// Reverse sweep from a 1x1 loss. Returns one gradient per ParamId; a
    /// ParamId registered more than once receives the sum of its adjoints.
    std::map<ParamId, Matrix<Scalar>> backward(const Var<Scalar>& loss) const {
        if (loss.tape() != this)
            throw TapeError("backward: loss belongs to a different tape");
        const Node& root = nodes_[loss.id()];
        if (root.value.rows() != 1 || root.value.cols() != 1) {
            std::ostringstream os;
            os << "backward: loss must be 1x1, got " << root.value.rows() << "x" << root.value.cols();
            throw ShapeError(os.str());
        }
        if (!grad_enabled_ || !root.needs_grad)
            throw TapeError("backward: tape holds no trainable parameters");

        std::vector<Matrix<Scalar>> adj(loss.id() + 1);
        std::vector<bool> touched(loss.id() + 1, false);
        adj[loss.id()] = Matrix<Scalar>::Ones(1, 1);
        touched[loss.id()] = true;

        auto accumulate = [&](std::size_t target, const auto& contribution) {
            if (!nodes_[target].needs_grad)
                return;
            if (touched[target]) {
                adj[target] += contribution;
            } else {
                adj[target] = contribution;
                touched[target] = true;
            }
        };

        // Nodes are appended in evaluation order, so index order is topological.
        for (std::size_t k = loss.id() + 1; k-- > 0;) {
            if (!touched[k])
                continue;
            const Node& n = nodes_[k];
            const Matrix<Scalar>& g = adj[k];
            switch (n.kind) {
            case OpKind::leaf:
                break;
            case OpKind::matmul:
                accumulate(n.lhs, g * nodes_[n.rhs].value.transpose());
                accumulate(n.rhs, nodes_[n.lhs].value.transpose() * g);
                break;
            case OpKind::hadamard:
                accumulate(n.lhs, g.cwiseProduct(nodes_[n.rhs].value));
                accumulate(n.rhs, g.cwiseProduct(nodes_[n.lhs].value));
                break;
            case OpKind::transpose:
                accumulate(n.lhs, g.transpose());
                break;
            case OpKind::add:
                accumulate(n.lhs, g);
                accumulate(n.rhs, g);
                break;
            case OpKind::scale:
                accumulate(n.lhs, n.alpha * g);
                break;
            case OpKind::relu: {
                const Matrix<Scalar>& x = nodes_[n.lhs].value;
                accumulate(n.lhs, (x.array() > Scalar(0)).select(g.array(), Scalar(0)).matrix());
                break;
            }
            case OpKind::log_softmax: {
                // dx = g - softmax * rowsum(g)
                const Matrix<Scalar> p = n.value.array().exp().matrix();
                Matrix<Scalar> dx = g;
                for (Eigen::Index r = 0; r < g.rows(); ++r)
                    dx.row(r) -= p.row(r) * g.row(r).sum();
                accumulate(n.lhs, dx);
                break;
            }
            case OpKind::row_mean: {
                const Eigen::Index r = nodes_[n.lhs].value.rows();
                accumulate(n.lhs, (g / Scalar(r)).replicate(r, 1));
                break;
            }
            case OpKind::sum: {
                const Matrix<Scalar>& x = nodes_[n.lhs].value;
                accumulate(n.lhs, Matrix<Scalar>::Constant(x.rows(), x.cols(), g(0, 0)));
                break;
            }
            case OpKind::affine_combine:
                accumulate(n.lhs, n.alpha * g);
                accumulate(n.rhs, n.beta * g);
                break;
            }
        }

        std::map<ParamId, Matrix<Scalar>> grads;
        for (std::size_t k = 0; k <= loss.id(); ++k) {
            const Node& n = nodes_[k];
            if (n.kind != OpKind::leaf || n.param < 0)
                continue;
            Matrix<Scalar> g = touched[k] ? adj[k] : Matrix<Scalar>::Zero(n.value.rows(), n.value.cols());
            auto it = grads.find(n.param);
            if (it == grads.end())
                grads.emplace(n.param, std::move(g));
            else
                it->second += g;
        }
        return grads;
    }

private:
    Var<Scalar> push(Node n) {
        nodes_.push_back(std::move(n));
        return Var<Scalar>(this, nodes_.size() - 1);
    }

    static void check_finite(const Matrix<Scalar>& value, OpKind kind) {
        if (!value.allFinite())
            throw NonFiniteError(std::string(op_name(kind)) + ": produced a non-finite value");
    }

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
};

namespace detail {

template <typename Scalar>
Tape<Scalar>& same_tape(const Var<Scalar>& a, const Var<Scalar>& b, OpKind kind) {
    if (a.tape() == nullptr || a.tape() != b.tape())
        throw TapeError(std::string(op_name(kind)) + ": operands live on different tapes");
    return *a.tape();
}

template <typename Scalar>
[[noreturn]] void shape_mismatch(OpKind kind, const Var<Scalar>& a, const Var<Scalar>& b) {
    std::ostringstream os;
    os << op_name(kind) << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw ShapeError(os.str());
}

template <typename Scalar>
void require_same_shape(OpKind kind, const Var<Scalar>& a, const Var<Scalar>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        shape_mismatch(kind, a, b);
}

} // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
    auto& tape = detail::same_tape(a, b, OpKind::matmul);
    if (a.cols() != b.rows())
        detail::shape_mismatch(OpKind::matmul, a, b);
    return tape.record(OpKind::matmul, a.value() * b.value(), a.id(), b.id());
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
    auto& tape = detail::same_tape(a, b, OpKind::hadamard);
    detail::require_same_shape(OpKind::hadamard, a, b);
    return tape.record(OpKind::hadamard, a.value().cwiseProduct(b.value()), a.id(), b.id());
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
    auto& tape = detail::same_tape(a, b, OpKind::add);
    detail::require_same_shape(OpKind::add, a, b);
    return tape.record(OpKind::add, a.value() + b.value(), a.id(), b.id());
}

/// alpha * a + beta * b
template <typename Scalar>
Var<Scalar> affine_combine(const Var<Scalar>& a, const Var<Scalar>& b, Scalar alpha, Scalar beta) {
    auto& tape = detail::same_tape(a, b, OpKind::affine_combine);
    detail::require_same_shape(OpKind::affine_combine, a, b);
    return tape.record(OpKind::affine_combine, alpha * a.value() + beta * b.value(), a.id(), b.id(), alpha,
                       beta);
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
    Matrix<Scalar> t = a.value().transpose();
    return a.tape()->record(OpKind::transpose, std::move(t), a.id(), a.id());
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar alpha) {
    return a.tape()->record(OpKind::scale, alpha * a.value(), a.id(), a.id(), alpha);
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
    return a.tape()->record(OpKind::relu, a.value().cwiseMax(Scalar(0)), a.id(), a.id());
}

template <typename Scalar>
Var<Scalar> log_softmax(const Var<Scalar>& a) {
    const Matrix<Scalar>& x = a.value();
    Matrix<Scalar> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Scalar m = x.row(r).maxCoeff();
        const Scalar lse = m + std::log((x.row(r).array() - m).exp().sum());
        out.row(r) = x.row(r).array() - lse;
    }
    return a.tape()->record(OpKind::log_softmax, std::move(out), a.id(), a.id());
}

template <typename Scalar>
Var<Scalar> row_mean(const Var<Scalar>& a) {
    Matrix<Scalar> m = a.value().colwise().mean();
    return a.tape()->record(OpKind::row_mean, std::move(m), a.id(), a.id());
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
    Matrix<Scalar> s(1, 1);
    s(0, 0) = a.value().sum();
    return a.tape()->record(OpKind::sum, std::move(s), a.id(), a.id());
}

} // namespace steode::lingrad

#endif // STEODE_LINGRAD_HPP
