#include "sdm/optim.hpp"

#include <cmath>

#include "sdm/error.hpp"

namespace sdm {

void Adam::step(double lr, const std::vector<Matrix*>& params,
                const std::vector<const Matrix*>& grads) {
    if (params.size() != grads.size()) throw ContractError("adam: params/grads size mismatch");
    if (m_.empty()) {
        for (const Matrix* p : params) {
            m_.push_back(Matrix(p->rows, p->cols));
            v_.push_back(Matrix(p->rows, p->cols));
        }
    }
    if (m_.size() != params.size()) throw ContractError("adam: parameter list changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = *grads[k];
        if (!p.same_shape(g)) throw ShapeError("adam: gradient shape mismatch");
        Matrix& m = m_[k];
        Matrix& v = v_[k];
        for (size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace sdm
