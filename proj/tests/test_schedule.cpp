#include <doctest.h>

#include <cmath>

#include "sdm/error.hpp"
#include "sdm/rng.hpp"
#include "sdm/schedule.hpp"

using namespace sdm;

TEST_CASE("shift fixes endpoints and hits the k=5 midpoint value") {
    CHECK(shift_timestep(5.0, 0.0) == 0.0);
    CHECK(shift_timestep(5.0, 1000.0) == doctest::Approx(1000.0).epsilon(1e-15));
    CHECK(std::abs(shift_timestep(5.0, 500.0) - 2500.0 / 3.0) < 1e-12);
}

TEST_CASE("shift is strictly monotone for several k") {
    for (double k : {1.0, 3.0, 5.0, 8.0}) {
        double prev = -1.0;
        for (int i = 0; i <= 200; ++i) {
            const double t = 5.0 * i;
            const double s = shift_timestep(k, t);
            CHECK(s > prev);
            prev = s;
        }
        CHECK(shift_timestep(k, 0.0) == 0.0);
        CHECK(shift_timestep(k, 1000.0) == doctest::Approx(1000.0).epsilon(1e-15));
    }
}

TEST_CASE("shift rejects t outside [0, 1000]") {
    CHECK_THROWS_AS(shift_timestep(5.0, -1.0), DomainError);
    CHECK_THROWS_AS(shift_timestep(5.0, 1000.5), DomainError);
}

TEST_CASE("forward diffuse endpoints") {
    NoiseSchedule sched;
    Rng rng(stream_seed(9, "fdiff"));
    Matrix x = rng.normal_matrix(3, 2);
    Matrix eps = rng.normal_matrix(3, 2);
    CHECK(forward_diffuse(x, 0.0, eps, sched) == x);
    CHECK(forward_diffuse(x, 1000.0, eps, sched) == eps);
}

TEST_CASE("forward diffuse k=5 t=500 coefficients are (1/6, 5/6)") {
    NoiseSchedule sched;
    Matrix x = Matrix::filled(2, 2, 1.0);
    Matrix eps = Matrix::filled(2, 2, -1.0);
    Matrix out = forward_diffuse(x, 500.0, eps, sched);
    const double expect = (1.0 - 2500.0 / 3000.0) * 1.0 + (2500.0 / 3000.0) * (-1.0);
    for (double v : out.data) CHECK(std::abs(v - expect) < 1e-12);
}

TEST_CASE("forward diffuse coefficients sum to one for all t") {
    NoiseSchedule sched;
    Matrix ones = Matrix::filled(1, 4, 1.0);
    for (int i = 0; i <= 100; ++i) {
        const double t = 10.0 * i;
        Matrix out = forward_diffuse(ones, t, ones, sched);
        for (double v : out.data) CHECK(std::abs(v - 1.0) < 1e-12);
    }
}

TEST_CASE("score coefficients: endpoints and singularity") {
    NoiseSchedule sched;
    auto c = score_coefficients(1000.0, sched);
    CHECK(c.alpha_t == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(c.sigma_t == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(score_coefficients(0.0, sched), SingularityError);

    // straight path: coefficients sum to 1, not alpha^2 + sigma^2 = 1
    auto mid = score_coefficients(500.0, sched);
    CHECK(std::abs(mid.alpha_t + mid.sigma_t - 1.0) < 1e-15);
    CHECK(std::abs(mid.alpha_t * mid.alpha_t + mid.sigma_t * mid.sigma_t - 1.0) > 0.1);
}

TEST_CASE("score assembled from coefficients matches analytic gaussian marginal") {
    // data ~ N(mu0, I); marginal at t is N(alpha_t mu0, (alpha_t^2 + sigma_t^2) I)
    NoiseSchedule sched;
    Rng rng(stream_seed(12, "score-marginal"));
    Matrix mu0 = Matrix::row_vector({0.7, -1.3});
    for (double t : {250.0, 500.0, 750.0}) {
        auto c = score_coefficients(t, sched);
        Matrix x_t = rng.normal_matrix(5, 2);
        const double marg_var = c.alpha_t * c.alpha_t + c.sigma_t * c.sigma_t;
        for (int i = 0; i < x_t.rows; ++i) {
            // denoiser = exact posterior mean for unit-variance data
            const double gain = c.alpha_t / marg_var;
            for (int j = 0; j < 2; ++j) {
                const double mu_post = mu0(0, j) + gain * (x_t(i, j) - c.alpha_t * mu0(0, j));
                const double eq_score = -(x_t(i, j) - c.alpha_t * mu_post) / (c.sigma_t * c.sigma_t);
                const double marginal_score = -(x_t(i, j) - c.alpha_t * mu0(0, j)) / marg_var;
                CHECK(std::abs(eq_score - marginal_score) < 1e-10);
            }
        }
    }
}

TEST_CASE("precondition generator identities") {
    Rng rng(stream_seed(15, "precond"));
    Preconditioning pc;
    Matrix eps = rng.normal_matrix(3, 4);
    CHECK(precondition_generator(Matrix(3, 4), eps, pc) == eps);
    CHECK(max_abs(precondition_generator(eps, eps, pc)) == 0.0);

    Matrix v = rng.normal_matrix(3, 4);
    Matrix out = precondition_generator(v, eps, pc);
    CHECK(max_abs(sub(out, sub(eps, v))) < 1e-15);
}

TEST_CASE("schedule validation") {
    NoiseSchedule bad;
    bad.timesteps = {750.0, 750.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.timesteps = {1000.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.timesteps = {1000.0, 250.0};
    bad.shift_k = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    NoiseSchedule good;
    good.validate();
    CHECK(good.interior_timesteps() == std::vector<double>{750.0, 500.0, 250.0});
}
