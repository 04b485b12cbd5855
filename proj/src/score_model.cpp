#include "sdm/score_model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sdm/error.hpp"
#include "sdm/tape.hpp"

namespace sdm {

Matrix score_from_denoiser(const Matrix& mu, const Matrix& x_t, double t,
                           const NoiseSchedule& schedule) {
    if (!mu.same_shape(x_t)) throw ShapeError("score_from_denoiser: mu vs x_t shape mismatch");
    const ScoreCoefficients c = score_coefficients(t, schedule);  // throws at t = 0
    Matrix s(x_t.rows, x_t.cols);
    const double inv_var = 1.0 / (c.sigma_t * c.sigma_t);
    for (size_t i = 0; i < s.data.size(); ++i) {
        s.data[i] = -(x_t.data[i] - c.alpha_t * mu.data[i]) * inv_var;
    }
    return s;
}

ScoreModel ScoreModel::analytic_gaussian(Matrix mean, double var) {
    if (mean.rows != 1 || mean.cols < 1) throw ConfigError("analytic_gaussian: mean must be 1 x dim");
    if (var <= 0.0) throw ConfigError("analytic_gaussian: var must be positive");
    ScoreModel m;
    m.kind_ = Kind::AnalyticGaussian;
    m.dim_ = mean.cols;
    m.components_.push_back({1.0, std::move(mean), var});
    return m;
}

ScoreModel ScoreModel::analytic_mixture(std::vector<MixtureComponent> components) {
    if (components.empty()) throw ConfigError("analytic_mixture: needs at least one component");
    ScoreModel m;
    m.kind_ = Kind::AnalyticMixture;
    m.dim_ = components.front().mean.cols;
    double total = 0.0;
    for (const auto& c : components) {
        if (c.mean.rows != 1 || c.mean.cols != m.dim_) {
            throw ConfigError("analytic_mixture: component mean shape mismatch");
        }
        if (c.var <= 0.0 || c.weight <= 0.0) {
            throw ConfigError("analytic_mixture: weights and variances must be positive");
        }
        total += c.weight;
    }
    m.components_ = std::move(components);
    for (auto& c : m.components_) c.weight /= total;
    return m;
}

ScoreModel ScoreModel::learned(int dim, int hidden, Rng& rng) {
    if (dim < 1 || hidden < 1) throw ConfigError("learned score model: bad dimensions");
    ScoreModel m;
    m.kind_ = Kind::Learned;
    m.dim_ = dim;
    const int feat = 3 * dim + 2;
    m.lin_w_ = Matrix(feat, dim);
    m.lin_b_ = Matrix(1, dim);
    // start the affine head at mu ~ x (identity on the first feature block)
    for (int j = 0; j < dim; ++j) m.lin_w_(j, j) = 1.0;
    m.corr_ = MlpParams::init({feat, hidden, dim}, rng, Activation::Silu);
    // small correction at start so the affine head dominates early training
    m.corr_.weights.back() = scale(m.corr_.weights.back(), 0.1);
    return m;
}

Matrix ScoreModel::learned_features(const Matrix& x_t, double s) const {
    Matrix f(x_t.rows, 3 * dim_ + 2);
    for (int i = 0; i < x_t.rows; ++i) {
        for (int j = 0; j < dim_; ++j) {
            const double v = x_t(i, j);
            f(i, j) = v;
            f(i, dim_ + j) = s * v;
            f(i, 2 * dim_ + j) = s * s * v;
        }
        f(i, 3 * dim_) = s;
        f(i, 3 * dim_ + 1) = s * s;
    }
    return f;
}

Matrix ScoreModel::denoise(const Matrix& x_t, double t, const NoiseSchedule& schedule) const {
    const ScoreCoefficients c = score_coefficients(t, schedule);
    if (x_t.cols != dim_) throw ShapeError("denoise: x_t cols vs model dim");

    if (kind_ == Kind::Learned) {
        Matrix f = learned_features(x_t, c.sigma_t);
        Matrix out = matmul(f, lin_w_);
        for (int i = 0; i < out.rows; ++i) {
            for (int j = 0; j < out.cols; ++j) out(i, j) += lin_b_(0, j);
        }
        return add(out, mlp_forward(corr_, f));
    }

    // Posterior mean of a (mixture of) isotropic Gaussians under
    // x_t = alpha x0 + sigma eps: responsibilities over components, then the
    // per-component posterior mean mu_k + gain_k (x_t - alpha mu_k).
    const double a = c.alpha_t;
    const double s2 = c.sigma_t * c.sigma_t;
    Matrix out(x_t.rows, dim_);
    for (int i = 0; i < x_t.rows; ++i) {
        // log responsibilities
        std::vector<double> logw(components_.size());
        double max_logw = -std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < components_.size(); ++k) {
            const auto& comp = components_[k];
            const double marg_var = a * a * comp.var + s2;
            double sq = 0.0;
            for (int j = 0; j < dim_; ++j) {
                const double d = x_t(i, j) - a * comp.mean(0, j);
                sq += d * d;
            }
            logw[k] = std::log(comp.weight) - 0.5 * dim_ * std::log(marg_var) - 0.5 * sq / marg_var;
            max_logw = std::max(max_logw, logw[k]);
        }
        double z = 0.0;
        for (double& lw : logw) {
            lw = std::exp(lw - max_logw);
            z += lw;
        }
        for (size_t k = 0; k < components_.size(); ++k) {
            const auto& comp = components_[k];
            const double resp = logw[k] / z;
            const double marg_var = a * a * comp.var + s2;
            const double gain = a * comp.var / marg_var;
            for (int j = 0; j < dim_; ++j) {
                const double post = comp.mean(0, j) + gain * (x_t(i, j) - a * comp.mean(0, j));
                out(i, j) += resp * post;
            }
        }
    }
    return out;
}

Matrix ScoreModel::score(const Matrix& x_t, double t, const NoiseSchedule& schedule) const {
    return score_from_denoiser(denoise(x_t, t, schedule), x_t, t, schedule);
}

double ScoreModel::train_step(const Matrix& x0_batch, const NoiseSchedule& schedule, Rng& rng,
                              double lr, const std::vector<double>& row_weights) {
    if (kind_ != Kind::Learned) throw ContractError("train_step: analytic score models are fixed");
    if (x0_batch.cols != dim_) throw ShapeError("train_step: x0 cols vs model dim");
    if (!row_weights.empty() && static_cast<int>(row_weights.size()) != x0_batch.rows) {
        throw ShapeError("train_step: row_weights length vs batch rows");
    }

    const std::vector<double> ts = schedule.interior_timesteps();
    if (ts.empty()) throw ContractError("train_step: schedule has no interior timesteps");
    const double t = ts[static_cast<size_t>(rng.uniform_int(static_cast<int>(ts.size())))];
    const ScoreCoefficients c = score_coefficients(t, schedule);

    Matrix eps = rng.normal_matrix(x0_batch.rows, x0_batch.cols);
    Matrix x_t = forward_diffuse(x0_batch, t, eps, schedule);
    Matrix features = learned_features(x_t, c.sigma_t);

    Tape tape;
    NodeId f = tape.leaf(features, false);
    NodeId lw = tape.leaf(lin_w_, true);
    NodeId lb = tape.leaf(lin_b_, true);
    StagedMlp staged = stage_mlp(tape, corr_, true);
    NodeId mu = tape.add(tape.add_rowvec(tape.matmul(f, lw), lb),
                         mlp_apply(tape, staged, corr_.act, f));
    NodeId diff = tape.sub(mu, tape.leaf(x0_batch, false));
    NodeId sq = tape.mul(diff, diff);
    if (!row_weights.empty()) {
        Matrix w(x0_batch.rows, x0_batch.cols);
        for (int i = 0; i < w.rows; ++i) {
            for (int j = 0; j < w.cols; ++j) w(i, j) = row_weights[static_cast<size_t>(i)];
        }
        sq = tape.mul(sq, tape.leaf(std::move(w), false));
    }
    NodeId loss = tape.scale(tape.sum_all(sq),
                             1.0 / static_cast<double>(x0_batch.rows * x0_batch.cols));
    Gradients g = tape.backward(loss);

    std::vector<Matrix*> params = parameters();
    std::vector<const Matrix*> grads;
    grads.push_back(&g.at(lw));
    grads.push_back(&g.at(lb));
    for (size_t l = 0; l < staged.weights.size(); ++l) {
        grads.push_back(&g.at(staged.weights[l]));
    }
    for (size_t l = 0; l < staged.biases.size(); ++l) {
        grads.push_back(&g.at(staged.biases[l]));
    }
    adam_.step(lr, params, grads);
    return tape.value(loss)(0, 0);
}

std::vector<Matrix*> ScoreModel::parameters() {
    if (kind_ != Kind::Learned) return {};
    std::vector<Matrix*> p = {&lin_w_, &lin_b_};
    for (auto& w : corr_.weights) p.push_back(&w);
    for (auto& b : corr_.biases) p.push_back(&b);
    return p;
}

std::vector<const Matrix*> ScoreModel::parameters() const {
    if (kind_ != Kind::Learned) return {};
    std::vector<const Matrix*> p = {&lin_w_, &lin_b_};
    for (const auto& w : corr_.weights) p.push_back(&w);
    for (const auto& b : corr_.biases) p.push_back(&b);
    return p;
}

bool ScoreModel::parameters_finite() const {
    for (const Matrix* p : parameters()) {
        if (!p->all_finite()) return false;
    }
    return true;
}

const Matrix& ScoreModel::gaussian_mean() const {
    if (kind_ != Kind::AnalyticGaussian) throw ContractError("gaussian_mean: not a gaussian model");
    return components_.front().mean;
}

double ScoreModel::gaussian_var() const {
    if (kind_ != Kind::AnalyticGaussian) throw ContractError("gaussian_var: not a gaussian model");
    return components_.front().var;
}

double train_fake_score(ScoreModel& s_fake, const Matrix& x0_batch, const NoiseSchedule& schedule,
                        Rng& rng, double lr, const std::vector<double>& row_weights) {
    return s_fake.train_step(x0_batch, schedule, rng, lr, row_weights);
}

}  // namespace sdm
