#include "sdm/rollout.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "sdm/error.hpp"

namespace sdm {

void GeneratorConfig::validate() const {
    if (data_dim < 1) throw ConfigError("generator: data_dim must be >= 1");
    if (cond_dim < 0) throw ConfigError("generator: cond_dim must be >= 0");
    if (hidden < 1) throw ConfigError("generator: hidden must be >= 1");
    if (tokens_per_chunk < 1) throw ConfigError("generator: tokens_per_chunk must be >= 1");
    if (n_heads < 1 || head_dim < 2 || head_dim % 2 != 0) {
        throw ConfigError("generator: bad attention head geometry");
    }
}

Generator Generator::init(const GeneratorConfig& cfg, Rng& rng) {
    cfg.validate();
    Generator g;
    g.cfg = cfg;
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(cfg.data_dim));
    g.w_q = scale(rng.normal_matrix(cfg.data_dim, cfg.kv_cols()), proj_std);
    g.w_k = scale(rng.normal_matrix(cfg.data_dim, cfg.kv_cols()), proj_std);
    g.w_v = scale(rng.normal_matrix(cfg.data_dim, cfg.kv_cols()), proj_std);
    g.mlp = MlpParams::init({cfg.feature_dim(), cfg.hidden, cfg.hidden, cfg.data_dim}, rng,
                            Activation::Silu);
    return g;
}

std::vector<Matrix*> Generator::parameters() {
    std::vector<Matrix*> p = {&w_q, &w_k, &w_v};
    for (auto& w : mlp.weights) p.push_back(&w);
    for (auto& b : mlp.biases) p.push_back(&b);
    return p;
}

std::vector<const Matrix*> Generator::parameters() const {
    std::vector<const Matrix*> p = {&w_q, &w_k, &w_v};
    for (const auto& w : mlp.weights) p.push_back(&w);
    for (const auto& b : mlp.biases) p.push_back(&b);
    return p;
}

std::vector<Matrix*> Generator::trainable_parameters() {
    std::vector<Matrix*> p = {&w_q};
    for (auto& w : mlp.weights) p.push_back(&w);
    for (auto& b : mlp.biases) p.push_back(&b);
    return p;
}

bool Generator::parameters_finite() const {
    for (const Matrix* p : parameters()) {
        if (!p->all_finite()) return false;
    }
    return true;
}

StagedGenerator stage_generator(Tape& tape, const Generator& gen, bool requires_grad) {
    StagedGenerator s;
    s.w_q = tape.leaf(gen.w_q, requires_grad);
    s.mlp = stage_mlp(tape, gen.mlp, requires_grad);
    s.trainable_nodes.push_back(s.w_q);
    for (NodeId id : s.mlp.weights) s.trainable_nodes.push_back(id);
    for (NodeId id : s.mlp.biases) s.trainable_nodes.push_back(id);
    return s;
}

StreamState::StreamState(const EmaSinkConfig& cache_cfg, Matrix cond, uint64_t stream_seed)
    : cache(cache_cfg), conditioning(std::move(cond)), seed(stream_seed), chunk_rng(0) {
    begin_chunk();
}

void StreamState::begin_chunk() {
    chunk_rng = Rng(mix_seed(seed, static_cast<uint64_t>(chunk_index)));
}

// Velocity net forward for one chunk at one noise level.
static NodeId generator_velocity(Tape& tape, const StagedGenerator& staged, const Generator& gen,
                                 NodeId x_in, double noise_fraction, StreamState& stream,
                                 const std::vector<int64_t>& positions) {
    const GeneratorConfig& cfg = gen.cfg;
    const int t_rows = cfg.tokens_per_chunk;
    ++gen.velocity_calls;

    // chunk mean broadcast back to every row
    Matrix averager = Matrix::filled(t_rows, t_rows, 1.0 / t_rows);
    NodeId mean_rows = tape.matmul(tape.leaf(std::move(averager), false), x_in);

    NodeId features = tape.concat_cols(x_in, mean_rows);
    features = tape.concat_cols(features, tape.leaf(Matrix::filled(t_rows, 1, noise_fraction), false));
    if (cfg.cond_dim > 0) {
        Matrix cond_rows(t_rows, cfg.cond_dim);
        for (int i = 0; i < t_rows; ++i) {
            for (int j = 0; j < cfg.cond_dim; ++j) cond_rows(i, j) = stream.conditioning(0, j);
        }
        features = tape.concat_cols(features, tape.leaf(std::move(cond_rows), false));
    }

    NodeId readout;
    if (stream.cache.empty()) {
        readout = tape.leaf(Matrix(t_rows, cfg.kv_cols()), false);
    } else {
        NodeId q = tape.matmul(x_in, staged.w_q);
        readout = stream.cache.attend_on_tape(tape, q, positions);
    }
    features = tape.concat_cols(features, readout);

    return mlp_apply(tape, staged.mlp, gen.mlp.act, features);
}

NodeId denoise_step_node(Tape& tape, const StagedGenerator& staged, const Generator& gen,
                         NodeId x_t, double t, StreamState& stream, const NoiseSchedule& schedule) {
    if (!schedule.contains(t)) {
        throw ContractError("denoise_step: t = " + std::to_string(t) + " not in schedule");
    }
    const GeneratorConfig& cfg = gen.cfg;
    const Preconditioning& pc = cfg.precond;
    const double t_shifted = shift_timestep(schedule.shift_k, t);
    const double noise_fraction = pc.c_noise(t_shifted) / NoiseSchedule::t_max;

    std::vector<int64_t> positions(static_cast<size_t>(cfg.tokens_per_chunk));
    std::iota(positions.begin(), positions.end(), stream.chunk_index * cfg.tokens_per_chunk);

    NodeId net_in = (pc.c_in == 1.0) ? x_t : tape.scale(x_t, pc.c_in);
    NodeId v = generator_velocity(tape, staged, gen, net_in, noise_fraction, stream, positions);

    // clean estimate c_skip * x_t - c_out * v
    NodeId x0 = tape.add(tape.scale(x_t, pc.c_skip), tape.scale(v, -pc.c_out));

    // locate the next (lower) schedule level
    size_t idx = 0;
    while (schedule.timesteps[idx] != t) ++idx;
    if (idx + 1 == schedule.timesteps.size()) return x0;  // final step: no re-noising

    const double t_next = schedule.timesteps[idx + 1];
    const ScoreCoefficients c = score_coefficients(t_next, schedule);
    Matrix eps = stream.chunk_rng.normal_matrix(cfg.tokens_per_chunk, cfg.data_dim);
    return tape.add(tape.scale(x0, c.alpha_t), tape.leaf(sdm::scale(eps, c.sigma_t), false));
}

FrameChunk denoise_step(const Generator& gen, const FrameChunk& x_t, double t, StreamState& stream,
                        const NoiseSchedule& schedule) {
    Tape tape;
    StagedGenerator staged = stage_generator(tape, gen, false);
    NodeId x = tape.leaf(x_t.tokens, false);
    NodeId out = denoise_step_node(tape, staged, gen, x, t, stream, schedule);
    return FrameChunk{tape.value(out), x_t.start_position};
}

TracedChunk rollout_chunk_traced(Tape& tape, const StagedGenerator& staged, const Generator& gen,
                                 StreamState& stream, const NoiseSchedule& schedule) {
    const GeneratorConfig& cfg = gen.cfg;
    stream.begin_chunk();
    const int64_t start = stream.chunk_index * cfg.tokens_per_chunk;

    Matrix init_noise = stream.chunk_rng.normal_matrix(cfg.tokens_per_chunk, cfg.data_dim);
    NodeId x = tape.leaf(std::move(init_noise), false);
    for (double t : schedule.timesteps) {
        x = denoise_step_node(tape, staged, gen, x, t, stream, schedule);
    }

    const Matrix& clean = tape.value(x);
    stream.cache.append_chunk(matmul(clean, gen.w_k), matmul(clean, gen.w_v), start);
    ++stream.chunk_index;
    return TracedChunk{x, FrameChunk{clean, start}};
}

FrameChunk rollout_chunk(const Generator& gen, StreamState& stream, const NoiseSchedule& schedule) {
    Tape tape;
    StagedGenerator staged = stage_generator(tape, gen, false);
    return rollout_chunk_traced(tape, staged, gen, stream, schedule).chunk;
}

std::vector<FrameChunk> generate(const Generator& gen, StreamState& stream,
                                 const NoiseSchedule& schedule, int n_chunks) {
    if (n_chunks < 1) throw ContractError("generate: n_chunks must be >= 1");
    std::vector<FrameChunk> out;
    out.reserve(static_cast<size_t>(n_chunks));
    for (int i = 0; i < n_chunks; ++i) out.push_back(rollout_chunk(gen, stream, schedule));
    return out;
}

void switch_conditioning(StreamState& stream, const Matrix& c_new) {
    if (!stream.conditioning.same_shape(c_new)) {
        throw ShapeError("switch_conditioning: conditioning dimension mismatch");
    }
    stream.conditioning = c_new;
}

void write_sequence_csv(std::ostream& os, const std::vector<FrameChunk>& chunks) {
    for (size_t ci = 0; ci < chunks.size(); ++ci) {
        const Matrix& toks = chunks[ci].tokens;
        for (int r = 0; r < toks.rows; ++r) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%zu,%d", ci, r);
            os << buf;
            for (int j = 0; j < toks.cols; ++j) {
                std::snprintf(buf, sizeof(buf), ",%.17g", toks(r, j));
                os << buf;
            }
            os << "\n";
        }
    }
}

void write_sequence_csv_file(const std::string& path, const std::vector<FrameChunk>& chunks) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "chunk_index,token_index,dims...\n";
    write_sequence_csv(os, chunks);
}

std::vector<FrameChunk> sample_toy_sequence(const ToyDynamicsConfig& cfg, int n_chunks,
                                            int tokens_per_chunk, Rng& rng) {
    if (n_chunks < 1) throw ContractError("sample_toy_sequence: n_chunks must be >= 1");
    std::vector<FrameChunk> out;
    Matrix pos(1, cfg.data_dim);
    Matrix vel(1, cfg.data_dim);
    for (int j = 0; j < cfg.data_dim; ++j) pos(0, j) = rng.normal() * 0.5;
    for (int c = 0; c < n_chunks; ++c) {
        for (int j = 0; j < cfg.data_dim; ++j) {
            vel(0, j) = cfg.velocity_retain * vel(0, j) + cfg.kick_std * rng.normal();
            pos(0, j) = cfg.position_decay * pos(0, j) + vel(0, j);
        }
        Matrix tokens(tokens_per_chunk, cfg.data_dim);
        for (int r = 0; r < tokens_per_chunk; ++r) {
            for (int j = 0; j < cfg.data_dim; ++j) {
                tokens(r, j) = pos(0, j) + cfg.token_jitter * rng.normal();
            }
        }
        out.push_back(FrameChunk{std::move(tokens), static_cast<int64_t>(c) * tokens_per_chunk});
    }
    return out;
}

ToyMoments toy_stationary_moments(const ToyDynamicsConfig& cfg, int n_sequences, int n_chunks,
                                  int tokens_per_chunk, Rng& rng) {
    ToyMoments m;
    m.mean = Matrix(1, cfg.data_dim);
    double sq = 0.0;
    int64_t count = 0;
    std::vector<Matrix> all;
    for (int s = 0; s < n_sequences; ++s) {
        auto seq = sample_toy_sequence(cfg, n_chunks, tokens_per_chunk, rng);
        // skip the first chunks so the state has mixed toward stationarity
        for (size_t c = seq.size() / 2; c < seq.size(); ++c) {
            all.push_back(seq[c].tokens);
            for (int r = 0; r < seq[c].tokens.rows; ++r) {
                for (int j = 0; j < cfg.data_dim; ++j) m.mean(0, j) += seq[c].tokens(r, j);
                ++count;
            }
        }
    }
    m.mean = scale(m.mean, 1.0 / static_cast<double>(count));
    for (const Matrix& toks : all) {
        for (int r = 0; r < toks.rows; ++r) {
            for (int j = 0; j < cfg.data_dim; ++j) {
                const double d = toks(r, j) - m.mean(0, j);
                sq += d * d;
            }
        }
    }
    m.var = sq / static_cast<double>(count * cfg.data_dim);
    return m;
}

}  // namespace sdm
