#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdm/ema_sink_cache.hpp"
#include "sdm/mlp.hpp"
#include "sdm/rng.hpp"
#include "sdm/schedule.hpp"

namespace sdm {

// One generated chunk: a fixed number of token rows at consecutive absolute
// positions.
struct FrameChunk {
    Matrix tokens;  // tokens_per_chunk x data_dim
    int64_t start_position = 0;
};

struct GeneratorConfig {
    int data_dim = 2;
    int cond_dim = 2;
    int hidden = 32;
    int tokens_per_chunk = 3;
    int n_heads = 2;
    int head_dim = 8;
    double rope_base = 10000.0;
    Preconditioning precond;

    int kv_cols() const { return n_heads * head_dim; }
    // per-token input: own latent, chunk mean, noise fraction, conditioning,
    // attention readout
    int feature_dim() const { return 2 * data_dim + 1 + cond_dim + kv_cols(); }
    void validate() const;
};

// Small velocity net: a per-token MLP over the current chunk's tokens, their
// chunk mean, the noise level, the conditioning vector and an attention
// readout from the cache. The clean estimate is x_t - v. Key/value
// projections feed the cache when a finished chunk is appended.
struct Generator {
    GeneratorConfig cfg;
    Matrix w_q;  // data_dim x kv_cols
    Matrix w_k;
    Matrix w_v;
    MlpParams mlp;
    mutable uint64_t velocity_calls = 0;  // forward invocation counter

    static Generator init(const GeneratorConfig& cfg, Rng& rng);

    // Checkpointable parameters, fixed order.
    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;
    // Parameters reached by the chunk-local gradient (w_k/w_v only feed the
    // detached cache and stay at their initialization).
    std::vector<Matrix*> trainable_parameters();
    bool parameters_finite() const;
};

// Generator parameters staged as tape leaves; node order matches
// trainable_parameters().
struct StagedGenerator {
    NodeId w_q;
    StagedMlp mlp;
    std::vector<NodeId> trainable_nodes;
};
StagedGenerator stage_generator(Tape& tape, const Generator& gen, bool requires_grad);

// Per-stream generation state. Chunk noise comes from a counter-derived RNG
// so chunk i draws the same noise regardless of what happened before it.
struct StreamState {
    EmaSinkCache cache;
    Matrix conditioning;  // 1 x cond_dim
    int64_t chunk_index = 0;
    uint64_t seed = 0;
    Rng chunk_rng;

    StreamState(const EmaSinkConfig& cache_cfg, Matrix conditioning, uint64_t seed);
    void begin_chunk();  // re-derives chunk_rng for the current chunk_index
};

// One denoising step: clean estimate at t, then forward diffusion to the
// next schedule level (or the clean estimate itself at the final step).
// Differentiable through the staged parameters; cache contents and injected
// noise are constants.
NodeId denoise_step_node(Tape& tape, const StagedGenerator& staged, const Generator& gen,
                         NodeId x_t, double t, StreamState& stream, const NoiseSchedule& schedule);

// Value-level wrapper over denoise_step_node.
FrameChunk denoise_step(const Generator& gen, const FrameChunk& x_t, double t, StreamState& stream,
                        const NoiseSchedule& schedule);

// Full composition for one chunk on a caller-owned tape: draws the initial
// noise, runs every schedule step, appends the clean chunk's K/V to the
// cache and advances the stream. Returns the clean chunk node.
struct TracedChunk {
    NodeId x0;
    FrameChunk chunk;
};
TracedChunk rollout_chunk_traced(Tape& tape, const StagedGenerator& staged, const Generator& gen,
                                 StreamState& stream, const NoiseSchedule& schedule);

FrameChunk rollout_chunk(const Generator& gen, StreamState& stream, const NoiseSchedule& schedule);

std::vector<FrameChunk> generate(const Generator& gen, StreamState& stream,
                                 const NoiseSchedule& schedule, int n_chunks);

// Replaces the conditioning vector; the attention cache is untouched.
void switch_conditioning(StreamState& stream, const Matrix& c_new);

// CSV dump, one row per token: chunk_index, token_index, dims...
void write_sequence_csv(std::ostream& os, const std::vector<FrameChunk>& chunks);
void write_sequence_csv_file(const std::string& path, const std::vector<FrameChunk>& chunks);

// Toy sequence distribution with measurable motion: per-sequence latent
// state (position, velocity) followed through damped stochastic dynamics;
// chunk tokens are the position plus per-token jitter.
struct ToyDynamicsConfig {
    int data_dim = 2;
    double velocity_retain = 0.5;  // velocity carried between chunks
    double position_decay = 0.8;   // pull toward the origin
    double kick_std = 0.3;         // fresh velocity noise per chunk
    double token_jitter = 0.05;
};
std::vector<FrameChunk> sample_toy_sequence(const ToyDynamicsConfig& cfg, int n_chunks,
                                            int tokens_per_chunk, Rng& rng);

// Empirical mean and isotropic variance of the chunk-token marginal,
// estimated from fresh sequences. Used to fit an analytic teacher.
struct ToyMoments {
    Matrix mean;  // 1 x data_dim
    double var = 1.0;
};
ToyMoments toy_stationary_moments(const ToyDynamicsConfig& cfg, int n_sequences, int n_chunks,
                                  int tokens_per_chunk, Rng& rng);

}  // namespace sdm
