#pragma once

#include <vector>

#include "sdm/matrix.hpp"
#include "sdm/mlp.hpp"
#include "sdm/optim.hpp"
#include "sdm/rng.hpp"
#include "sdm/schedule.hpp"

namespace sdm {

// Score s = -(x_t - alpha_t * mu) / sigma_t^2, the denoiser-to-score
// identity. Exact whenever mu is the posterior mean of the clean sample
// given x_t.
Matrix score_from_denoiser(const Matrix& mu, const Matrix& x_t, double t,
                           const NoiseSchedule& schedule);

// A denoiser mu(x_t, t) from which the score is derived. Analytic kinds
// return the exact posterior mean of their distribution under the forward
// process; the learned kind is a regression model trained on samples.
//
// The learned denoiser is an affine head plus a small silu correction over
// the features [x, s*x, s^2*x, s, s^2] with s the noise fraction at t. On a
// few-step schedule the quadratic-in-s affine part can represent the exact
// Gaussian posterior mean at every interior timestep.
class ScoreModel {
public:
    enum class Kind { AnalyticGaussian, AnalyticMixture, Learned };

    struct MixtureComponent {
        double weight;
        Matrix mean;  // 1 x dim
        double var;   // isotropic
    };

    static ScoreModel analytic_gaussian(Matrix mean, double var);
    static ScoreModel analytic_mixture(std::vector<MixtureComponent> components);
    static ScoreModel learned(int dim, int hidden, Rng& rng);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }

    // Denoised estimate, one row per sample.
    Matrix denoise(const Matrix& x_t, double t, const NoiseSchedule& schedule) const;
    // Score of the marginal at t via the denoiser identity.
    Matrix score(const Matrix& x_t, double t, const NoiseSchedule& schedule) const;

    // Learned kind: one regression step of mu(x_t, t) toward x0 on freshly
    // noised samples. Returns the mean-squared loss before the update.
    // row_weights, when non-empty, reweight the per-row squared errors (one
    // weight per row, mean 1); the fit then targets the correspondingly
    // reweighted sample distribution.
    double train_step(const Matrix& x0_batch, const NoiseSchedule& schedule, Rng& rng, double lr,
                      const std::vector<double>& row_weights = {});

    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;
    bool parameters_finite() const;

    // Analytic gaussian accessors (used by reports and tests).
    const Matrix& gaussian_mean() const;
    double gaussian_var() const;

private:
    ScoreModel() = default;

    Matrix learned_features(const Matrix& x_t, double noise_fraction) const;

    Kind kind_ = Kind::AnalyticGaussian;
    int dim_ = 0;

    // analytic
    std::vector<MixtureComponent> components_;

    // learned
    Matrix lin_w_;  // feature_dim x dim
    Matrix lin_b_;  // 1 x dim
    MlpParams corr_;
    Adam adam_;
};

// One gradient step on E_t || mu_fake(noised(x0), t) - x0 ||^2 with x0
// detached from any generator tape. Contract error on analytic kinds.
double train_fake_score(ScoreModel& s_fake, const Matrix& x0_batch, const NoiseSchedule& schedule,
                        Rng& rng, double lr, const std::vector<double>& row_weights = {});

}  // namespace sdm
