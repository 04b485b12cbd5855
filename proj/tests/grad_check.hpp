#pragma once

// Central finite-difference oracle for tape gradients. Rebuilds the taped
// computation from scratch at every probe so the check stays independent of
// the reverse pass it verifies.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sdm/tape.hpp"

namespace gradcheck {

using BuildFn = std::function<sdm::NodeId(sdm::Tape&, const std::vector<sdm::NodeId>&)>;

struct Result {
    double max_rel_err = 0.0;
    int checked = 0;
};

inline Result compare_to_finite_differences(const std::vector<sdm::Matrix>& params,
                                            const BuildFn& build, double step = 1e-5) {
    sdm::Tape tape;
    std::vector<sdm::NodeId> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(tape.leaf(p, true));
    sdm::NodeId loss = build(tape, ids);
    sdm::Gradients grads = tape.backward(loss);

    auto eval_at = [&](size_t k, size_t i, double delta) {
        std::vector<sdm::Matrix> shifted = params;
        shifted[k].data[i] += delta;
        sdm::Tape t2;
        std::vector<sdm::NodeId> ids2;
        ids2.reserve(shifted.size());
        for (const auto& p : shifted) ids2.push_back(t2.leaf(p, false));
        return t2.value(build(t2, ids2))(0, 0);
    };

    Result res;
    for (size_t k = 0; k < params.size(); ++k) {
        for (size_t i = 0; i < params[k].data.size(); ++i) {
            const double fd = (eval_at(k, i, step) - eval_at(k, i, -step)) / (2.0 * step);
            const double ad = grads.at(ids[k]).data[i];
            const double denom = std::max({std::abs(fd), std::abs(ad), 1.0});
            res.max_rel_err = std::max(res.max_rel_err, std::abs(fd - ad) / denom);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace gradcheck
