#include "sdm/mlp.hpp"

#include <cmath>
#include <string>

#include "sdm/error.hpp"

namespace sdm {

MlpParams MlpParams::init(const std::vector<int>& dims, Rng& rng, Activation act) {
    if (dims.size() < 2) throw ConfigError("mlp init: need at least input and output dims");
    MlpParams p;
    p.act = act;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double std = std::sqrt(2.0 / (fan_in + fan_out));
        p.weights.push_back(scale(rng.normal_matrix(fan_in, fan_out), std));
        p.biases.push_back(Matrix(1, fan_out));
    }
    return p;
}

StagedMlp stage_mlp(Tape& tape, const MlpParams& params, bool requires_grad) {
    StagedMlp s;
    for (size_t l = 0; l < params.weights.size(); ++l) {
        s.weights.push_back(tape.leaf(params.weights[l], requires_grad));
        s.biases.push_back(tape.leaf(params.biases[l], requires_grad));
    }
    return s;
}

NodeId mlp_apply(Tape& tape, const StagedMlp& staged, Activation act, NodeId x) {
    NodeId h = x;
    for (size_t l = 0; l < staged.weights.size(); ++l) {
        h = tape.add_rowvec(tape.matmul(h, staged.weights[l]), staged.biases[l]);
        if (l + 1 < staged.weights.size()) {
            h = (act == Activation::Tanh) ? tape.tanh_op(h) : tape.silu(h);
        }
    }
    return h;
}

Matrix mlp_forward(const MlpParams& params, const Matrix& x) {
    Tape tape;
    StagedMlp staged = stage_mlp(tape, params, false);
    NodeId out = mlp_apply(tape, staged, params.act, tape.leaf(x, false));
    return tape.value(out);
}

}  // namespace sdm
