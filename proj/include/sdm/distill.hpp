#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdm/rollout.hpp"
#include "sdm/score_model.hpp"

namespace sdm {

// Training blew up: some parameter became non-finite.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Pure reward evaluation: a scalar per decoded sample. Gradients are never
// taken through it; the reward enters training only as a static weight.
struct RewardFunction {
    enum class Kind { Constant, Linear, Dynamics };
    Kind kind = Kind::Constant;
    double constant = 0.0;
    Matrix direction;  // 1 x dim, Linear kind

    static RewardFunction make_constant(double value);
    static RewardFunction make_linear(Matrix direction);
    static RewardFunction make_dynamics();

    double eval_vector(const Matrix& batch, int row) const;
    double eval_sequence(const std::vector<FrameChunk>& chunks) const;
};

// Mean consecutive-chunk displacement squashed to [0, 1) by tanh.
double dynamics_reward(const std::vector<FrameChunk>& chunks);

// Normalized tilt weights w_i = exp(r_i / beta) / mean_j exp(r_j / beta),
// log-sum-exp stabilized. Mean weight is 1 by construction so reward-weighted
// gradients keep the scale of unweighted ones.
struct RewardWeights {
    std::vector<double> rewards;
    double beta = 1.0;
    std::vector<double> weights;
};
RewardWeights compute_weights(const std::vector<double>& rewards, double beta);

// Per-sample matching gradient w.r.t. the generator output:
// g = -(s_real(noised(x0), t) - s_fake(noised(x0), t)). The caller
// backpropagates g through the generator tape; score models and the
// injected noise are constants.
Matrix dmd_gradient(const Matrix& x0_batch, double t, const ScoreModel& s_real,
                    const ScoreModel& s_fake, const NoiseSchedule& schedule, Rng& rng);

// Reward-tilted variant: g_i scaled by w_i from compute_weights. With
// rows_per_sample > 1 each sample owns that many consecutive rows and its
// weight applies to all of them.
Matrix redmd_gradient(const Matrix& x0_batch, const std::vector<double>& rewards, double beta,
                      double t, const ScoreModel& s_real, const ScoreModel& s_fake,
                      const NoiseSchedule& schedule, Rng& rng, int rows_per_sample = 1);

// Noise-to-sample affine map x0 = eps A + b; the distillation target for the
// analytic teacher experiments. Its distribution is N(b, A^T A) exactly.
struct AffineGenerator {
    Matrix a;  // dim x dim
    Matrix b;  // 1 x dim

    static AffineGenerator identity_init(int dim);
    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;
    bool parameters_finite() const;
    Matrix sample(int n, Rng& rng) const;
    Matrix mean() const { return b; }
    std::vector<double> per_dim_std() const;
};

enum class DistillMode { Gaussian, Sequence };

struct DistillConfig {
    DistillMode mode = DistillMode::Gaussian;
    int steps = 2000;
    int batch = 128;
    double beta = 0.5;
    bool use_reward_weighting = true;
    double gen_lr = 3e-3;
    double fake_lr = 1.5e-3;
    int fake_updates_per_gen = 5;
    // fake-only warmup batches before the first generator update, so the
    // fake score starts matched to the initial generator
    int fake_warmup_batches = 0;
    // linear generator lr decay toward gen_lr * gen_lr_final_fraction
    double gen_lr_final_fraction = 1.0;
    // when > 0, checkpoints are evaluated with (and the loop finally ships)
    // an exponential moving average of the generator weights
    double eval_ema_decay = 0.0;
    uint64_t seed = 0;
    // sequence mode
    int n_chunks = 8;
    int eval_every = 50;
    int eval_sequences = 48;
    int eval_chunks = 8;

    void validate() const;
};

struct StepRecord {
    int step = 0;
    double t = 0.0;
    double grad_norm = 0.0;
    double fake_loss = 0.0;
    double mean_reward = 0.0;
    double weight_min = 1.0;
    double weight_max = 1.0;
    double weight_mean = 1.0;
    std::vector<double> gen_mean;
    std::vector<double> gen_std;
    std::optional<double> dynamics;  // sequence-mode eval checkpoints
};

struct TrainingLog {
    std::vector<StepRecord> records;
    // (step, dynamics_degree) at every eval checkpoint, in order
    std::vector<std::pair<int, double>> dynamics_checkpoints;
};

std::string step_record_to_json(const StepRecord& r);

// Alternating distillation loop: several fake-score regression steps per
// generator update, reward-weighted matching gradient on the generator.
// Gaussian mode drives an affine generator on plain vectors; sequence mode
// rolls out chunks through the cache and backpropagates through one randomly
// selected chunk per sample. jsonl, when set, receives one record per step.
TrainingLog distill_loop(AffineGenerator& gen, const ScoreModel& s_real, ScoreModel& s_fake,
                         const RewardFunction& reward_fn, const DistillConfig& config,
                         const NoiseSchedule& schedule, std::ostream* jsonl = nullptr);

TrainingLog distill_loop(Generator& gen, const EmaSinkConfig& cache_cfg, const ScoreModel& s_real,
                         ScoreModel& s_fake, const RewardFunction& reward_fn,
                         const DistillConfig& config, const NoiseSchedule& schedule,
                         std::ostream* jsonl = nullptr);

// Versioned binary checkpoint of generator and fake-score parameters.
struct LoadedCheckpoint {
    std::optional<AffineGenerator> affine;
    std::optional<Generator> velocity;
    std::optional<ScoreModel> fake;
};
void save_checkpoint(const std::string& path, const Generator* velocity,
                     const AffineGenerator* affine, const ScoreModel* fake);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace sdm
