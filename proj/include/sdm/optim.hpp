#pragma once

#include <vector>

#include "sdm/matrix.hpp"

namespace sdm {

// Adam with bias correction. State is sized on first step and keyed by
// parameter order, so the same optimizer must always see the same parameter
// list. The learning rate is passed per step.
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(double lr, const std::vector<Matrix*>& params,
              const std::vector<const Matrix*>& grads);

private:
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Matrix> m_, v_;
};

}  // namespace sdm
