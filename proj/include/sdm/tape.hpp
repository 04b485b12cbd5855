#pragma once

#include <cstdint>
#include <vector>

#include "sdm/matrix.hpp"
#include "sdm/rope.hpp"

namespace sdm {

struct NodeId {
    int v = -1;
    bool valid() const { return v >= 0; }
};

struct Gradients;

// Reverse-mode tape over a fixed operation set: matmul, add (plus row-vector
// broadcast), elementwise mul, scale, tanh/silu, softmax (plain and masked),
// sum, concat, slice and rotary rotation. Nodes are recorded in construction
// order, which is a valid topological order; backward walks it in reverse.
//
// Tapes are single-owner and never shared across threads. Leaves flagged
// requires_grad receive accumulated adjoints; everything else (constants)
// reports a zero gradient.
class Tape {
public:
    NodeId leaf(Matrix value, bool requires_grad = false);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId a, NodeId bias);  // bias is 1 x cols, broadcast over rows
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double s);
    NodeId tanh_op(NodeId a);
    NodeId silu(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId softmax_rows_masked(NodeId a, NodeId mask);  // mask is a constant 0/1 node
    NodeId sum_all(NodeId a);                           // 1x1 result
    NodeId concat_rows(NodeId a, NodeId b);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId slice_rows(NodeId a, int r0, int r1);
    NodeId slice_cols(NodeId a, int c0, int c1);
    NodeId rope(NodeId a, std::vector<int64_t> positions, RopeParams params);

    // Composites over the fixed set.
    NodeId sub(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }
    NodeId dot_with(NodeId a, const Matrix& weights);  // sum(a .* const weights)

    const Matrix& value(NodeId id) const;
    bool requires_grad(NodeId id) const;
    size_t size() const { return nodes_.size(); }

    // Adjoint of every node w.r.t. a scalar loss (1x1 node).
    Gradients backward(NodeId loss) const;

private:
    enum class Op {
        Leaf,
        MatMul,
        Add,
        AddRowVec,
        Mul,
        Scale,
        Tanh,
        Silu,
        SoftmaxRows,
        SoftmaxRowsMasked,
        SumAll,
        ConcatRows,
        ConcatCols,
        SliceRows,
        SliceCols,
        Rope,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        Matrix value;
        bool requires_grad = false;
        double scalar = 0.0;            // Scale
        int r0 = 0, r1 = 0;             // slices
        std::vector<int64_t> positions; // Rope
        RopeParams rope_params;         // Rope
    };

    NodeId push(Node n);
    const Node& node(NodeId id) const;

    std::vector<Node> nodes_;
};

struct Gradients {
    std::vector<Matrix> adjoints;  // indexed by node id, shaped like each node's value
    const Matrix& at(NodeId id) const { return adjoints[static_cast<size_t>(id.v)]; }
};

}  // namespace sdm
