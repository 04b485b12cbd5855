#pragma once

#include <vector>

#include "sdm/matrix.hpp"

namespace sdm {

// Few-step denoising schedule on the [0, 1000] time axis. t = 1000 is pure
// noise, t = 0 is clean data. Timesteps run strictly decreasing.
struct NoiseSchedule {
    std::vector<double> timesteps = {1000.0, 750.0, 500.0, 250.0};
    double shift_k = 5.0;
    static constexpr double t_max = 1000.0;

    void validate() const;
    bool contains(double t) const;
    // Timesteps with nonzero data coefficient and nonzero noise, i.e. the
    // ones the distillation expectation samples from.
    std::vector<double> interior_timesteps() const;
};

struct Preconditioning {
    double c_skip = 1.0;
    double c_in = 1.0;
    double c_out = 1.0;
    double c_noise(double t) const { return t; }
};

// t'(k, t) = (k t / 1000) / (1 + (k - 1) t / 1000) * 1000. Fixes 0 and 1000,
// strictly monotone in t for k > 0.
double shift_timestep(double k, double t);

// x_t = (1 - t'/1000) x + (t'/1000) eps. Interpolation coefficients sum to 1;
// t = 0 returns x exactly, t = 1000 returns eps exactly.
Matrix forward_diffuse(const Matrix& x, double t, const Matrix& eps, const NoiseSchedule& schedule);

// The (data, noise) coefficient pair (alpha_t, sigma_t) of the forward map,
// i.e. x_t = alpha_t x0 + sigma_t eps. Throws at t = 0 where sigma_t = 0 and
// the score is undefined.
struct ScoreCoefficients {
    double alpha_t;
    double sigma_t;
};
ScoreCoefficients score_coefficients(double t, const NoiseSchedule& schedule);

// G = c_skip * eps - c_out * v_out. With default coefficients this is
// eps - v_out, turning a predicted displacement into a clean estimate.
Matrix precondition_generator(const Matrix& v_out, const Matrix& eps, const Preconditioning& pc);

}  // namespace sdm
