#pragma once

#include <vector>

#include "sdm/rng.hpp"
#include "sdm/tape.hpp"

namespace sdm {

enum class Activation { Tanh, Silu };

// Affine -> nonlinearity stack; the final layer is linear.
struct MlpParams {
    std::vector<Matrix> weights;  // each [in x out]
    std::vector<Matrix> biases;   // each [1 x out]
    Activation act = Activation::Silu;

    static MlpParams init(const std::vector<int>& dims, Rng& rng,
                          Activation act = Activation::Silu);

    int input_dim() const { return weights.front().rows; }
    int output_dim() const { return weights.back().cols; }
    size_t layer_count() const { return weights.size(); }
};

// Parameter leaves staged on a tape so a forward pass can be differentiated.
struct StagedMlp {
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;
};

StagedMlp stage_mlp(Tape& tape, const MlpParams& params, bool requires_grad);
NodeId mlp_apply(Tape& tape, const StagedMlp& staged, Activation act, NodeId x);

// Convenience forward on plain values (runs a throwaway constant tape).
Matrix mlp_forward(const MlpParams& params, const Matrix& x);

}  // namespace sdm
