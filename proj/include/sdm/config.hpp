#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdm/distill.hpp"
#include "sdm/ema_sink_cache.hpp"
#include "sdm/rollout.hpp"
#include "sdm/schedule.hpp"

namespace sdm {

// Experiment configuration: flat section.key=value text (or the equivalent
// nested JSON), validated on load. All randomness derives from `seed`
// through named sub-streams, so runs are reproducible file-for-file.
struct ExperimentConfig {
    uint64_t seed = 42;
    std::string out_dir = "out";

    // cache
    double cache_alpha = 0.99;
    int cache_window = 9;
    int cache_tokens_per_chunk = 3;
    int cache_head_dim = 8;
    int cache_n_heads = 2;
    double cache_rope_base = 10000.0;

    // schedule
    std::vector<double> schedule_timesteps = {1000.0, 750.0, 500.0, 250.0};
    double schedule_shift_k = 5.0;

    // generator
    int gen_hidden = 32;
    int gen_cond_dim = 2;

    // distillation
    std::string distill_mode = "gaussian";    // gaussian | dynamics
    std::string distill_reward = "constant";  // constant | linear | dynamics
    double distill_beta = 0.5;
    double distill_gen_lr = 3e-3;
    double distill_fake_lr = 1.5e-3;
    int distill_fake_ratio = 5;
    int distill_steps = 2000;
    int distill_batch = 128;
    int distill_warmup = 0;
    double distill_lr_final_fraction = 1.0;
    double distill_ema = 0.0;
    int distill_n_chunks = 4;
    int distill_eval_every = 100;
    int distill_eval_sequences = 192;
    int distill_eval_chunks = 8;
    bool distill_use_weighting = true;
    double reward_constant = 0.0;
    std::vector<double> reward_direction = {0.4, -0.3};
    std::vector<double> teacher_mean = {0.0, 0.0};
    double teacher_var = 1.0;

    // toy data
    int data_dim = 2;
    double data_velocity_retain = 0.5;
    double data_position_decay = 0.8;
    double data_kick_std = 0.3;
    double data_token_jitter = 0.05;

    // rollout command
    int rollout_chunks = 32;

    // derived views
    EmaSinkConfig cache_config() const;
    NoiseSchedule schedule() const;
    GeneratorConfig generator_config() const;
    DistillConfig distill_config() const;
    ToyDynamicsConfig toy_config() const;
    RewardFunction reward_function() const;

    // Throws ConfigError listing every offending field.
    void validate() const;
};

// Flat key=value serialization; keys are written sorted so the output is
// canonical. load() accepts the same format or, when the content starts
// with '{', nested JSON with the sections as objects.
std::string save_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace sdm
