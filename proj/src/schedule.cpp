#include "sdm/schedule.hpp"

#include <cmath>
#include <string>

#include "sdm/error.hpp"

namespace sdm {

void NoiseSchedule::validate() const {
    if (timesteps.empty()) throw ConfigError("schedule: empty timestep list");
    if (shift_k <= 0.0) throw ConfigError("schedule: shift_k must be positive");
    double prev = t_max + 1.0;
    for (double t : timesteps) {
        if (!(t > 0.0 && t <= t_max)) {
            throw ConfigError("schedule: timestep " + std::to_string(t) + " outside (0, 1000]");
        }
        if (t >= prev) throw ConfigError("schedule: timesteps must be strictly decreasing");
        prev = t;
    }
}

bool NoiseSchedule::contains(double t) const {
    for (double s : timesteps) {
        if (s == t) return true;
    }
    return false;
}

std::vector<double> NoiseSchedule::interior_timesteps() const {
    std::vector<double> out;
    for (double t : timesteps) {
        if (t > 0.0 && t < t_max) out.push_back(t);
    }
    return out;
}

double shift_timestep(double k, double t) {
    if (k <= 0.0) throw DomainError("shift_timestep: k must be positive");
    if (t < 0.0 || t > NoiseSchedule::t_max) {
        throw DomainError("shift_timestep: t = " + std::to_string(t) + " outside [0, 1000]");
    }
    const double u = t / NoiseSchedule::t_max;
    return (k * u) / (1.0 + (k - 1.0) * u) * NoiseSchedule::t_max;
}

Matrix forward_diffuse(const Matrix& x, double t, const Matrix& eps, const NoiseSchedule& schedule) {
    if (!x.same_shape(eps)) throw ShapeError("forward_diffuse: x and eps shapes differ");
    const double noise_coef = shift_timestep(schedule.shift_k, t) / NoiseSchedule::t_max;
    const double data_coef = 1.0 - noise_coef;
    Matrix out(x.rows, x.cols);
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = data_coef * x.data[i] + noise_coef * eps.data[i];
    }
    return out;
}

ScoreCoefficients score_coefficients(double t, const NoiseSchedule& schedule) {
    if (t < 0.0 || t > NoiseSchedule::t_max) {
        throw DomainError("score_coefficients: t outside [0, 1000]");
    }
    if (t == 0.0) {
        throw SingularityError("score_coefficients: sigma_t = 0 at t = 0, score undefined");
    }
    const double sigma = shift_timestep(schedule.shift_k, t) / NoiseSchedule::t_max;
    return ScoreCoefficients{1.0 - sigma, sigma};
}

Matrix precondition_generator(const Matrix& v_out, const Matrix& eps, const Preconditioning& pc) {
    if (!v_out.same_shape(eps)) throw ShapeError("precondition_generator: shape mismatch");
    Matrix out(v_out.rows, v_out.cols);
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = pc.c_skip * eps.data[i] - pc.c_out * v_out.data[i];
    }
    return out;
}

}  // namespace sdm
