#include <doctest.h>

#include <cmath>
#include <sstream>
#include <tuple>

#include "sdm/distill.hpp"
#include "sdm/error.hpp"
#include "sdm/metrics.hpp"
#include "sdm/rng.hpp"

using namespace sdm;

TEST_CASE("equal rewards give unit weights exactly") {
    auto w = compute_weights({0.7, 0.7, 0.7, 0.7}, 0.5);
    for (double v : w.weights) CHECK(v == 1.0);
}

TEST_CASE("huge beta degenerates to unit weights") {
    auto w = compute_weights({-3.0, 0.0, 5.0, 1.2}, 1e12);
    for (double v : w.weights) CHECK(std::abs(v - 1.0) < 1e-9);
}

TEST_CASE("weights match hand arithmetic for rewards 0 and ln 2") {
    auto w = compute_weights({0.0, std::log(2.0)}, 1.0);
    CHECK(std::abs(w.weights[0] - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(w.weights[1] - 4.0 / 3.0) < 1e-12);
}

TEST_CASE("weights are mean-one, positive and monotone in rewards") {
    Rng rng(stream_seed(81, "weights-props"));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> rewards;
        const int n = 2 + rng.uniform_int(20);
        for (int i = 0; i < n; ++i) rewards.push_back(rng.normal() * 3.0);
        const double beta = 0.1 + rng.uniform() * 3.0;
        auto w = compute_weights(rewards, beta);
        double mean = 0.0;
        for (double v : w.weights) {
            CHECK(v > 0.0);
            mean += v;
        }
        mean /= n;
        CHECK(std::abs(mean - 1.0) <= 1e-12);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (rewards[i] < rewards[j]) CHECK(w.weights[i] < w.weights[j]);
            }
        }
    }
}

TEST_CASE("beta must be positive") {
    CHECK_THROWS_AS(compute_weights({1.0}, 0.0), DomainError);
    CHECK_THROWS_AS(compute_weights({1.0}, -2.0), DomainError);
}

TEST_CASE("matched score models give exactly zero gradient") {
    NoiseSchedule sched;
    Rng rng(stream_seed(82, "dmd-zero"));
    ScoreModel teacher = ScoreModel::analytic_gaussian(Matrix::row_vector({0.3, -0.2}), 1.0);
    Matrix x0 = rng.normal_matrix(8, 2);
    Matrix g = dmd_gradient(x0, 500.0, teacher, teacher, sched, rng);
    CHECK(max_abs(g) == 0.0);
}

TEST_CASE("1-D gaussian pair: gradient sign pushes x0 toward the real mean") {
    // real N(1, 1), fake N(-1, 1): descent direction -g should point toward
    // the real mean, so g must be negative everywhere on a grid between them
    NoiseSchedule sched;
    Rng rng(stream_seed(83, "dmd-sign"));
    ScoreModel real = ScoreModel::analytic_gaussian(Matrix::row_vector({1.0}), 1.0);
    ScoreModel fake = ScoreModel::analytic_gaussian(Matrix::row_vector({-1.0}), 1.0);

    const double t = 500.0;
    Matrix grid(9, 1);
    for (int i = 0; i < 9; ++i) grid(i, 0) = -2.0 + 0.5 * i;
    // average over noise draws so the sign is about the score difference
    Matrix avg(9, 1);
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
        avg = add(avg, dmd_gradient(grid, t, real, fake, sched, rng));
    }
    avg = scale(avg, 1.0 / reps);
    for (int i = 0; i < 9; ++i) CHECK(avg(i, 0) < 0.0);
}

TEST_CASE("expectation over drawn t matches the per-t average") {
    NoiseSchedule sched;
    Rng rng(stream_seed(84, "dmd-mc"));
    ScoreModel real = ScoreModel::analytic_gaussian(Matrix::row_vector({0.8, 0.0}), 1.0);
    ScoreModel fake = ScoreModel::analytic_gaussian(Matrix::row_vector({-0.4, 0.3}), 1.3);
    Matrix x0 = rng.normal_matrix(4, 2);

    const auto ts = sched.interior_timesteps();
    const int draws = 10000;
    Matrix mc(4, 2);
    for (int i = 0; i < draws; ++i) {
        const double t = ts[static_cast<size_t>(rng.uniform_int(3))];
        mc = add(mc, dmd_gradient(x0, t, real, fake, sched, rng));
    }
    mc = scale(mc, 1.0 / draws);

    Matrix per_t(4, 2);
    for (double t : ts) {
        Matrix acc(4, 2);
        for (int i = 0; i < draws / 2; ++i) acc = add(acc, dmd_gradient(x0, t, real, fake, sched, rng));
        per_t = add(per_t, scale(acc, 1.0 / (draws / 2)));
    }
    per_t = scale(per_t, 1.0 / 3.0);

    // Monte-Carlo tolerance: a few standard errors of the noisier estimate
    CHECK(max_abs(sub(mc, per_t)) < 0.2);
}

TEST_CASE("constant reward reduces redmd to dmd bit-for-bit") {
    NoiseSchedule sched;
    ScoreModel real = ScoreModel::analytic_gaussian(Matrix::row_vector({0.5, 0.5}), 1.0);
    ScoreModel fake = ScoreModel::analytic_gaussian(Matrix::row_vector({0.0, 0.0}), 0.8);
    Rng rng_a(stream_seed(85, "redmd-a"));
    Rng rng_b(stream_seed(85, "redmd-a"));
    Rng data_rng(stream_seed(85, "redmd-data"));
    Matrix x0 = data_rng.normal_matrix(6, 2);

    Matrix g_dmd = dmd_gradient(x0, 750.0, real, fake, sched, rng_a);
    std::vector<double> rewards(6, 3.25);
    Matrix g_re = redmd_gradient(x0, rewards, 0.5, 750.0, real, fake, sched, rng_b);
    CHECK(g_dmd == g_re);
}

TEST_CASE("per-sample weights scale gradients exactly") {
    NoiseSchedule sched;
    ScoreModel real = ScoreModel::analytic_gaussian(Matrix::row_vector({0.5, 0.5}), 1.0);
    ScoreModel fake = ScoreModel::analytic_gaussian(Matrix::row_vector({0.0, 0.0}), 0.8);
    Rng rng_a(stream_seed(86, "redmd-scale"));
    Rng rng_b(stream_seed(86, "redmd-scale"));
    Rng data_rng(stream_seed(86, "redmd-scale-data"));
    Matrix x0 = data_rng.normal_matrix(2, 2);

    // rewards chosen so the batch weights are exactly 0.5 and 1.5
    const double beta = 1.0;
    const double r2 = std::log(3.0);  // exp(0)=1, exp(ln 3)=3 -> mean 2 -> weights 0.5, 1.5
    Matrix g_plain = dmd_gradient(x0, 500.0, real, fake, sched, rng_a);
    Matrix g_re = redmd_gradient(x0, {0.0, r2}, beta, 500.0, real, fake, sched, rng_b);
    for (int j = 0; j < 2; ++j) {
        CHECK(g_re(0, j) == 0.5 * g_plain(0, j));
        CHECK(g_re(1, j) == 1.5 * g_plain(1, j));
    }
}

TEST_CASE("reward internals never enter the gradient path") {
    // two reward functions with different constants produce identical
    // gradients: the tilt weights are all exactly one in both cases
    NoiseSchedule sched;
    ScoreModel real = ScoreModel::analytic_gaussian(Matrix::row_vector({0.5, -0.5}), 1.0);
    ScoreModel fake = ScoreModel::analytic_gaussian(Matrix::row_vector({0.1, 0.1}), 1.2);
    Rng rng_a(stream_seed(87, "reward-iso"));
    Rng rng_b(stream_seed(87, "reward-iso"));
    Rng data_rng(stream_seed(87, "reward-iso-data"));
    Matrix x0 = data_rng.normal_matrix(5, 2);

    Matrix g1 = redmd_gradient(x0, std::vector<double>(5, 0.0), 0.5, 250.0, real, fake, sched, rng_a);
    Matrix g2 = redmd_gradient(x0, std::vector<double>(5, 42.0), 0.5, 250.0, real, fake, sched, rng_b);
    CHECK(g1 == g2);
}

TEST_CASE("dynamics reward: static zero, monotone, hand value") {
    Rng rng(stream_seed(88, "dyn-reward"));
    Matrix tok = rng.normal_matrix(3, 2);
    std::vector<FrameChunk> static_seq = {{tok, 0}, {tok, 3}, {tok, 6}};
    CHECK(dynamics_reward(static_seq) == 0.0);

    auto stepped = [&](double step) {
        std::vector<FrameChunk> seq;
        for (int c = 0; c < 3; ++c) {
            Matrix t2(3, 2);
            for (int r = 0; r < 3; ++r) t2(r, 0) = step * c;
            seq.push_back({t2, static_cast<int64_t>(3 * c)});
        }
        return seq;
    };
    const double r1 = dynamics_reward(stepped(1.0));
    const double r2 = dynamics_reward(stepped(2.0));
    CHECK(r2 > r1);
    CHECK(std::abs(r1 - std::tanh(1.0)) < 1e-12);

    std::vector<FrameChunk> single = {{tok, 0}};
    CHECK_THROWS_AS(dynamics_reward(single), ContractError);
}

TEST_CASE("gaussian distillation matches the teacher's moments") {
    NoiseSchedule sched;
    Rng init_rng(stream_seed(90, "loop-dmd"));
    Matrix mu0 = Matrix::row_vector({1.2, -0.7});
    ScoreModel teacher = ScoreModel::analytic_gaussian(mu0, 1.0);
    ScoreModel fake = ScoreModel::learned(2, 32, init_rng);
    AffineGenerator gen = AffineGenerator::identity_init(2);

    DistillConfig cfg;
    cfg.mode = DistillMode::Gaussian;
    cfg.steps = 1500;
    cfg.batch = 128;
    cfg.use_reward_weighting = false;
    cfg.seed = 90;

    distill_loop(gen, teacher, fake, RewardFunction::make_constant(0.0), cfg, sched);

    CHECK(std::abs(gen.b(0, 0) - 1.2) < 0.05);
    CHECK(std::abs(gen.b(0, 1) + 0.7) < 0.05);
    for (double s : gen.per_dim_std()) CHECK(std::abs(s - 1.0) < 0.05);
}

TEST_CASE("constant reward trajectory is bit-identical to the unweighted loop") {
    NoiseSchedule sched;
    Matrix mu0 = Matrix::row_vector({0.5, 0.5});
    ScoreModel teacher = ScoreModel::analytic_gaussian(mu0, 1.0);

    auto run = [&](bool weighted, double reward_value) {
        Rng init_rng(stream_seed(91, "loop-reduction"));
        ScoreModel fake = ScoreModel::learned(2, 16, init_rng);
        AffineGenerator gen = AffineGenerator::identity_init(2);
        DistillConfig cfg;
        cfg.steps = 60;
        cfg.batch = 32;
        cfg.beta = 0.5;
        cfg.use_reward_weighting = weighted;
        cfg.seed = 91;
        std::ostringstream log;
        distill_loop(gen, teacher, fake, RewardFunction::make_constant(reward_value), cfg, sched,
                     &log);
        return std::make_tuple(gen.a, gen.b, log.str());
    };

    auto [a1, b1, log1] = run(true, 1.75);
    auto [a2, b2, log2] = run(false, 1.75);
    CHECK(a1 == a2);
    CHECK(b1 == b2);
    // logs agree on everything except the reported weight stats, which the
    // unweighted loop leaves at their defaults; with a constant reward the
    // weighted loop computes exactly 1.0 for all of them, so even those match
    CHECK(log1 == log2);
}

TEST_CASE("divergent learning rate trips the guard") {
    NoiseSchedule sched;
    Rng init_rng(stream_seed(92, "loop-diverge"));
    ScoreModel teacher = ScoreModel::analytic_gaussian(Matrix::row_vector({0.0, 0.0}), 1.0);
    ScoreModel fake = ScoreModel::learned(2, 8, init_rng);
    AffineGenerator gen = AffineGenerator::identity_init(2);
    DistillConfig cfg;
    cfg.steps = 50;
    cfg.batch = 8;
    cfg.gen_lr = 1e308;  // first update saturates the params, second overflows
    cfg.seed = 92;
    CHECK_THROWS_AS(
        distill_loop(gen, teacher, fake, RewardFunction::make_constant(0.0), cfg, sched),
        DivergenceError);
}

TEST_CASE("checkpoint round trip for affine generator and fake score") {
    Rng rng(stream_seed(93, "ckpt"));
    AffineGenerator gen = AffineGenerator::identity_init(2);
    gen.a = rng.normal_matrix(2, 2);
    gen.b = rng.normal_matrix(1, 2);
    ScoreModel fake = ScoreModel::learned(2, 8, rng);

    const std::string path = "/tmp/sdm_test_ckpt.bin";
    save_checkpoint(path, nullptr, &gen, &fake);
    LoadedCheckpoint loaded = load_checkpoint(path);
    REQUIRE(loaded.affine.has_value());
    REQUIRE(loaded.fake.has_value());
    CHECK(loaded.affine->a == gen.a);
    CHECK(loaded.affine->b == gen.b);
    auto p0 = fake.parameters();
    auto p1 = loaded.fake->parameters();
    REQUIRE(p0.size() == p1.size());
    for (size_t i = 0; i < p0.size(); ++i) CHECK(*p0[i] == *p1[i]);
}
