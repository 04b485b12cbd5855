#include "sdm/tape.hpp"

#include <cmath>
#include <string>

#include "sdm/error.hpp"

namespace sdm {

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return NodeId{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(NodeId id) const {
    if (!id.valid() || id.v >= static_cast<int>(nodes_.size())) {
        throw ContractError("tape: invalid node id");
    }
    return nodes_[static_cast<size_t>(id.v)];
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }
bool Tape::requires_grad(NodeId id) const { return node(id).requires_grad; }

NodeId Tape::leaf(Matrix value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a.v;
    n.b = b.v;
    n.value = sdm::matmul(value(a), value(b));
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.op = Op::Add;
    n.a = a.v;
    n.b = b.v;
    n.value = sdm::add(value(a), value(b));
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::add_rowvec(NodeId a, NodeId bias) {
    const Matrix& x = value(a);
    const Matrix& v = value(bias);
    if (v.rows != 1 || v.cols != x.cols) {
        throw ShapeError("add_rowvec: bias must be 1x" + std::to_string(x.cols));
    }
    Node n;
    n.op = Op::AddRowVec;
    n.a = a.v;
    n.b = bias.v;
    n.value = x;
    for (int i = 0; i < x.rows; ++i) {
        for (int j = 0; j < x.cols; ++j) n.value(i, j) += v(0, j);
    }
    n.requires_grad = node(a).requires_grad || node(bias).requires_grad;
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::Mul;
    n.a = a.v;
    n.b = b.v;
    n.value = hadamard(value(a), value(b));
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a.v;
    n.scalar = s;
    n.value = sdm::scale(value(a), s);
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::tanh_op(NodeId a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a.v;
    n.value = value(a);
    for (double& v : n.value.data) v = std::tanh(v);
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

static double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

NodeId Tape::silu(NodeId a) {
    Node n;
    n.op = Op::Silu;
    n.a = a.v;
    n.value = value(a);
    for (double& v : n.value.data) v = v * sigmoid(v);
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
    Node n;
    n.op = Op::SoftmaxRows;
    n.a = a.v;
    n.value = sdm::softmax_rows(value(a));
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::softmax_rows_masked(NodeId a, NodeId mask) {
    if (node(mask).requires_grad) {
        throw ContractError("softmax_rows_masked: mask must be a constant");
    }
    Node n;
    n.op = Op::SoftmaxRowsMasked;
    n.a = a.v;
    n.b = mask.v;
    n.value = sdm::softmax_rows_masked(value(a), value(mask));
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::sum_all(NodeId a) {
    Node n;
    n.op = Op::SumAll;
    n.a = a.v;
    n.value = Matrix(1, 1);
    n.value(0, 0) = sdm::sum_all(value(a));
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::concat_rows(NodeId a, NodeId b) {
    Node n;
    n.op = Op::ConcatRows;
    n.a = a.v;
    n.b = b.v;
    n.value = sdm::concat_rows(value(a), value(b));
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
    Node n;
    n.op = Op::ConcatCols;
    n.a = a.v;
    n.b = b.v;
    n.value = sdm::concat_cols(value(a), value(b));
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

NodeId Tape::slice_rows(NodeId a, int r0, int r1) {
    Node n;
    n.op = Op::SliceRows;
    n.a = a.v;
    n.r0 = r0;
    n.r1 = r1;
    n.value = sdm::slice_rows(value(a), r0, r1);
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::slice_cols(NodeId a, int c0, int c1) {
    Node n;
    n.op = Op::SliceCols;
    n.a = a.v;
    n.r0 = c0;
    n.r1 = c1;
    n.value = sdm::slice_cols(value(a), c0, c1);
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::rope(NodeId a, std::vector<int64_t> positions, RopeParams params) {
    Node n;
    n.op = Op::Rope;
    n.a = a.v;
    n.value = rope_rotate(value(a), positions, params);
    n.positions = std::move(positions);
    n.rope_params = params;
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

NodeId Tape::dot_with(NodeId a, const Matrix& weights) {
    return sum_all(mul(a, leaf(weights, false)));
}

Gradients Tape::backward(NodeId loss) const {
    const Node& top = node(loss);
    if (top.value.rows != 1 || top.value.cols != 1) {
        throw ContractError("backward: loss node must be a 1x1 scalar");
    }
    Gradients g;
    g.adjoints.resize(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        g.adjoints[i] = Matrix(nodes_[i].value.rows, nodes_[i].value.cols);
    }
    g.adjoints[static_cast<size_t>(loss.v)](0, 0) = 1.0;

    for (int i = loss.v; i >= 0; --i) {
        const Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.requires_grad) continue;
        const Matrix& d = g.adjoints[static_cast<size_t>(i)];
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                const Matrix& A = nodes_[n.a].value;
                const Matrix& B = nodes_[n.b].value;
                if (nodes_[n.a].requires_grad) {
                    Matrix da = sdm::matmul(d, transpose(B));
                    g.adjoints[n.a] = sdm::add(g.adjoints[n.a], da);
                }
                if (nodes_[n.b].requires_grad) {
                    Matrix db = sdm::matmul(transpose(A), d);
                    g.adjoints[n.b] = sdm::add(g.adjoints[n.b], db);
                }
                break;
            }
            case Op::Add:
                if (nodes_[n.a].requires_grad) g.adjoints[n.a] = sdm::add(g.adjoints[n.a], d);
                if (nodes_[n.b].requires_grad) g.adjoints[n.b] = sdm::add(g.adjoints[n.b], d);
                break;
            case Op::AddRowVec: {
                if (nodes_[n.a].requires_grad) g.adjoints[n.a] = sdm::add(g.adjoints[n.a], d);
                if (nodes_[n.b].requires_grad) {
                    Matrix& db = g.adjoints[n.b];
                    for (int r = 0; r < d.rows; ++r) {
                        for (int c = 0; c < d.cols; ++c) db(0, c) += d(r, c);
                    }
                }
                break;
            }
            case Op::Mul:
                if (nodes_[n.a].requires_grad) {
                    g.adjoints[n.a] = sdm::add(g.adjoints[n.a], hadamard(d, nodes_[n.b].value));
                }
                if (nodes_[n.b].requires_grad) {
                    g.adjoints[n.b] = sdm::add(g.adjoints[n.b], hadamard(d, nodes_[n.a].value));
                }
                break;
            case Op::Scale:
                g.adjoints[n.a] = sdm::add(g.adjoints[n.a], sdm::scale(d, n.scalar));
                break;
            case Op::Tanh: {
                Matrix da = d;
                for (size_t k = 0; k < da.data.size(); ++k) {
                    const double y = n.value.data[k];
                    da.data[k] *= 1.0 - y * y;
                }
                g.adjoints[n.a] = sdm::add(g.adjoints[n.a], da);
                break;
            }
            case Op::Silu: {
                const Matrix& x = nodes_[n.a].value;
                Matrix da = d;
                for (size_t k = 0; k < da.data.size(); ++k) {
                    const double s = sigmoid(x.data[k]);
                    da.data[k] *= s * (1.0 + x.data[k] * (1.0 - s));
                }
                g.adjoints[n.a] = sdm::add(g.adjoints[n.a], da);
                break;
            }
            case Op::SoftmaxRows: {
                const Matrix& p = n.value;
                Matrix da(p.rows, p.cols);
                for (int r = 0; r < p.rows; ++r) {
                    double dot = 0.0;
                    for (int c = 0; c < p.cols; ++c) dot += d(r, c) * p(r, c);
                    for (int c = 0; c < p.cols; ++c) da(r, c) = p(r, c) * (d(r, c) - dot);
                }
                g.adjoints[n.a] = sdm::add(g.adjoints[n.a], da);
                break;
            }
            case Op::SoftmaxRowsMasked: {
                const Matrix& p = n.value;
                const Matrix& mask = nodes_[n.b].value;
                Matrix da(p.rows, p.cols);
                for (int r = 0; r < p.rows; ++r) {
                    double dot = 0.0;
                    for (int c = 0; c < p.cols; ++c) {
                        if (mask(r, c) != 0.0) dot += d(r, c) * p(r, c);
                    }
                    for (int c = 0; c < p.cols; ++c) {
                        if (mask(r, c) != 0.0) da(r, c) = p(r, c) * (d(r, c) - dot);
                    }
                }
                g.adjoints[n.a] = sdm::add(g.adjoints[n.a], da);
                break;
            }
            case Op::SumAll: {
                Matrix da = Matrix::filled(nodes_[n.a].value.rows, nodes_[n.a].value.cols, d(0, 0));
                g.adjoints[n.a] = sdm::add(g.adjoints[n.a], da);
                break;
            }
            case Op::ConcatRows: {
                const int ra = nodes_[n.a].value.rows;
                if (nodes_[n.a].requires_grad) {
                    g.adjoints[n.a] = sdm::add(g.adjoints[n.a], sdm::slice_rows(d, 0, ra));
                }
                if (nodes_[n.b].requires_grad) {
                    g.adjoints[n.b] = sdm::add(g.adjoints[n.b], sdm::slice_rows(d, ra, d.rows));
                }
                break;
            }
            case Op::ConcatCols: {
                const int ca = nodes_[n.a].value.cols;
                if (nodes_[n.a].requires_grad) {
                    g.adjoints[n.a] = sdm::add(g.adjoints[n.a], sdm::slice_cols(d, 0, ca));
                }
                if (nodes_[n.b].requires_grad) {
                    g.adjoints[n.b] = sdm::add(g.adjoints[n.b], sdm::slice_cols(d, ca, d.cols));
                }
                break;
            }
            case Op::SliceRows: {
                Matrix& da = g.adjoints[n.a];
                for (int r = n.r0; r < n.r1; ++r) {
                    for (int c = 0; c < d.cols; ++c) da(r, c) += d(r - n.r0, c);
                }
                break;
            }
            case Op::SliceCols: {
                Matrix& da = g.adjoints[n.a];
                for (int r = 0; r < d.rows; ++r) {
                    for (int c = n.r0; c < n.r1; ++c) da(r, c) += d(r, c - n.r0);
                }
                break;
            }
            case Op::Rope: {
                Matrix da = rope_rotate_inverse(d, n.positions, n.rope_params);
                g.adjoints[n.a] = sdm::add(g.adjoints[n.a], da);
                break;
            }
        }
    }
    return g;
}

}  // namespace sdm
