#include "sdm/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sdm/error.hpp"
#include "sdm/metrics.hpp"
#include "sdm/optim.hpp"
#include "sdm/serialize.hpp"

namespace sdm {

RewardFunction RewardFunction::make_constant(double value) {
    RewardFunction r;
    r.kind = Kind::Constant;
    r.constant = value;
    return r;
}

RewardFunction RewardFunction::make_linear(Matrix direction) {
    if (direction.rows != 1) throw ConfigError("linear reward: direction must be 1 x dim");
    RewardFunction r;
    r.kind = Kind::Linear;
    r.direction = std::move(direction);
    return r;
}

RewardFunction RewardFunction::make_dynamics() {
    RewardFunction r;
    r.kind = Kind::Dynamics;
    return r;
}

double RewardFunction::eval_vector(const Matrix& batch, int row) const {
    switch (kind) {
        case Kind::Constant:
            return constant;
        case Kind::Linear: {
            if (direction.cols != batch.cols) throw ShapeError("linear reward: dimension mismatch");
            double dot = 0.0;
            for (int j = 0; j < batch.cols; ++j) dot += direction(0, j) * batch(row, j);
            return dot;
        }
        case Kind::Dynamics:
            throw ContractError("dynamics reward needs a chunk sequence, not a vector");
    }
    return 0.0;
}

double RewardFunction::eval_sequence(const std::vector<FrameChunk>& chunks) const {
    switch (kind) {
        case Kind::Constant:
            return constant;
        case Kind::Dynamics:
            return dynamics_reward(chunks);
        case Kind::Linear:
            throw ContractError("linear reward is defined on vectors, not sequences");
    }
    return 0.0;
}

double dynamics_reward(const std::vector<FrameChunk>& chunks) {
    return std::tanh(dynamics_degree(chunks));
}

RewardWeights compute_weights(const std::vector<double>& rewards, double beta) {
    if (beta <= 0.0) throw DomainError("compute_weights: beta must be positive");
    if (rewards.empty()) throw ContractError("compute_weights: empty reward list");
    for (double r : rewards) {
        if (!std::isfinite(r)) throw DomainError("compute_weights: non-finite reward");
    }
    RewardWeights w;
    w.rewards = rewards;
    w.beta = beta;

    double max_exponent = -std::numeric_limits<double>::infinity();
    for (double r : rewards) max_exponent = std::max(max_exponent, r / beta);
    std::vector<double> shifted(rewards.size());
    double mean = 0.0;
    for (size_t i = 0; i < rewards.size(); ++i) {
        shifted[i] = std::exp(rewards[i] / beta - max_exponent);
        mean += shifted[i];
    }
    mean /= static_cast<double>(rewards.size());
    w.weights.resize(rewards.size());
    for (size_t i = 0; i < rewards.size(); ++i) w.weights[i] = shifted[i] / mean;
    return w;
}

Matrix dmd_gradient(const Matrix& x0_batch, double t, const ScoreModel& s_real,
                    const ScoreModel& s_fake, const NoiseSchedule& schedule, Rng& rng) {
    Matrix eps = rng.normal_matrix(x0_batch.rows, x0_batch.cols);
    Matrix x_t = forward_diffuse(x0_batch, t, eps, schedule);  // throws at bad t
    Matrix real = s_real.score(x_t, t, schedule);
    Matrix fake = s_fake.score(x_t, t, schedule);
    return sub(fake, real);  // -(s_real - s_fake)
}

Matrix redmd_gradient(const Matrix& x0_batch, const std::vector<double>& rewards, double beta,
                      double t, const ScoreModel& s_real, const ScoreModel& s_fake,
                      const NoiseSchedule& schedule, Rng& rng, int rows_per_sample) {
    if (rows_per_sample < 1) throw ContractError("redmd_gradient: rows_per_sample must be >= 1");
    if (static_cast<int>(rewards.size()) * rows_per_sample != x0_batch.rows) {
        throw ShapeError("redmd_gradient: rewards vs batch rows mismatch");
    }
    Matrix g = dmd_gradient(x0_batch, t, s_real, s_fake, schedule, rng);
    const RewardWeights w = compute_weights(rewards, beta);
    for (int i = 0; i < g.rows; ++i) {
        const double wi = w.weights[static_cast<size_t>(i / rows_per_sample)];
        for (int j = 0; j < g.cols; ++j) g(i, j) *= wi;
    }
    return g;
}

AffineGenerator AffineGenerator::identity_init(int dim) {
    AffineGenerator g;
    g.a = Matrix::identity(dim);
    g.b = Matrix(1, dim);
    return g;
}

std::vector<Matrix*> AffineGenerator::parameters() { return {&a, &b}; }
std::vector<const Matrix*> AffineGenerator::parameters() const { return {&a, &b}; }

bool AffineGenerator::parameters_finite() const { return a.all_finite() && b.all_finite(); }

Matrix AffineGenerator::sample(int n, Rng& rng) const {
    Matrix eps = rng.normal_matrix(n, a.rows);
    Matrix out = matmul(eps, a);
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < out.cols; ++j) out(i, j) += b(0, j);
    }
    return out;
}

std::vector<double> AffineGenerator::per_dim_std() const {
    // Cov = A^T A; std_j = ||column j of A||
    std::vector<double> out(static_cast<size_t>(a.cols));
    for (int j = 0; j < a.cols; ++j) {
        double sq = 0.0;
        for (int i = 0; i < a.rows; ++i) sq += a(i, j) * a(i, j);
        out[static_cast<size_t>(j)] = std::sqrt(sq);
    }
    return out;
}

void DistillConfig::validate() const {
    if (steps < 1) throw ConfigError("distill: steps must be >= 1");
    if (batch < 1) throw ConfigError("distill: batch must be >= 1");
    if (beta <= 0.0) throw ConfigError("distill: beta must be positive");
    if (gen_lr <= 0.0 || fake_lr <= 0.0) throw ConfigError("distill: learning rates must be positive");
    if (fake_updates_per_gen < 0) throw ConfigError("distill: fake update ratio must be >= 0");
    if (mode == DistillMode::Sequence) {
        if (n_chunks < 2) throw ConfigError("distill: sequence mode needs n_chunks >= 2");
        if (eval_every < 1 || eval_sequences < 1 || eval_chunks < 2) {
            throw ConfigError("distill: bad eval settings");
        }
    }
}

std::string step_record_to_json(const StepRecord& r) {
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "{\"step\":" << r.step << ",\"t\":" << num(r.t) << ",\"grad_norm\":" << num(r.grad_norm)
       << ",\"fake_loss\":" << num(r.fake_loss) << ",\"mean_reward\":" << num(r.mean_reward)
       << ",\"weight_min\":" << num(r.weight_min) << ",\"weight_max\":" << num(r.weight_max)
       << ",\"weight_mean\":" << num(r.weight_mean);
    os << ",\"gen_mean\":[";
    for (size_t i = 0; i < r.gen_mean.size(); ++i) os << (i ? "," : "") << num(r.gen_mean[i]);
    os << "],\"gen_std\":[";
    for (size_t i = 0; i < r.gen_std.size(); ++i) os << (i ? "," : "") << num(r.gen_std[i]);
    os << "]";
    if (r.dynamics.has_value()) os << ",\"dynamics\":" << num(*r.dynamics);
    os << "}";
    return os.str();
}

namespace {

void batch_moments(const Matrix& batch, std::vector<double>& mean, std::vector<double>& stdev) {
    mean.assign(static_cast<size_t>(batch.cols), 0.0);
    stdev.assign(static_cast<size_t>(batch.cols), 0.0);
    for (int i = 0; i < batch.rows; ++i) {
        for (int j = 0; j < batch.cols; ++j) mean[static_cast<size_t>(j)] += batch(i, j);
    }
    for (double& m : mean) m /= batch.rows;
    for (int i = 0; i < batch.rows; ++i) {
        for (int j = 0; j < batch.cols; ++j) {
            const double d = batch(i, j) - mean[static_cast<size_t>(j)];
            stdev[static_cast<size_t>(j)] += d * d;
        }
    }
    for (double& s : stdev) s = std::sqrt(s / std::max(1, batch.rows - 1));
}

void fill_weight_stats(StepRecord& rec, const std::vector<double>& weights) {
    rec.weight_min = *std::min_element(weights.begin(), weights.end());
    rec.weight_max = *std::max_element(weights.begin(), weights.end());
    double m = 0.0;
    for (double w : weights) m += w;
    rec.weight_mean = m / static_cast<double>(weights.size());
}

void emit(std::ostream* jsonl, const StepRecord& rec) {
    if (jsonl != nullptr) *jsonl << step_record_to_json(rec) << "\n";
}

double grad_norm_of(const std::vector<Matrix>& grads) {
    double sq = 0.0;
    for (const Matrix& g : grads) {
        for (double v : g.data) sq += v * v;
    }
    return std::sqrt(sq);
}

double draw_interior_t(const NoiseSchedule& schedule, Rng& rng) {
    const std::vector<double> ts = schedule.interior_timesteps();
    if (ts.empty()) throw ContractError("distill: schedule has no interior timesteps");
    return ts[static_cast<size_t>(rng.uniform_int(static_cast<int>(ts.size())))];
}

// Fake-score regression weights exp(-r/beta), normalized to mean 1. The fake
// model then estimates the reward-discounted generator distribution: the log
// density ratio splits as log(p_fake/p_real) = log(q/p_real) + r/beta - log Z
// with q proportional to p_fake exp(-r/beta), and once the reward-gradient
// term is dropped the weighted matching drives q toward the teacher, i.e. the
// generator toward the exponentially tilted target. With constant rewards all
// weights are exactly 1 and the plain objective is recovered bit for bit.
std::vector<double> fake_discount_weights(const std::vector<double>& rewards, double beta,
                                          int rows_per_sample) {
    std::vector<double> negated(rewards.size());
    for (size_t i = 0; i < rewards.size(); ++i) negated[i] = -rewards[i];
    const RewardWeights w = compute_weights(negated, beta);
    std::vector<double> rows;
    rows.reserve(rewards.size() * static_cast<size_t>(rows_per_sample));
    for (double v : w.weights) {
        for (int r = 0; r < rows_per_sample; ++r) rows.push_back(v);
    }
    return rows;
}

double decayed_lr(const DistillConfig& config, int step) {
    if (config.gen_lr_final_fraction >= 1.0 || config.steps <= 1) return config.gen_lr;
    const double u = static_cast<double>(step) / static_cast<double>(config.steps - 1);
    return config.gen_lr * (1.0 + (config.gen_lr_final_fraction - 1.0) * u);
}

}  // namespace

TrainingLog distill_loop(AffineGenerator& gen, const ScoreModel& s_real, ScoreModel& s_fake,
                         const RewardFunction& reward_fn, const DistillConfig& config,
                         const NoiseSchedule& schedule, std::ostream* jsonl) {
    config.validate();
    schedule.validate();
    if (reward_fn.kind == RewardFunction::Kind::Dynamics) {
        throw ContractError("distill: dynamics reward needs sequence mode");
    }
    const int dim = gen.a.rows;
    Rng rng(stream_seed(config.seed, "distill-loop"));
    Adam gen_opt;
    TrainingLog log;

    for (int wb = 0; wb < config.fake_warmup_batches; ++wb) {
        Matrix x0 = gen.sample(config.batch, rng);
        for (int i = 0; i < config.fake_updates_per_gen; ++i) {
            train_fake_score(s_fake, x0, schedule, rng, config.fake_lr);
        }
    }

    for (int step = 0; step < config.steps; ++step) {
        // generator samples with live tape
        Matrix eps = rng.normal_matrix(config.batch, dim);
        Tape tape;
        NodeId a_node = tape.leaf(gen.a, true);
        NodeId b_node = tape.leaf(gen.b, true);
        NodeId x0 = tape.add_rowvec(tape.matmul(tape.leaf(std::move(eps), false), a_node), b_node);
        const Matrix x0_val = tape.value(x0);  // copy: later pushes may reallocate node storage

        std::vector<double> rewards(static_cast<size_t>(config.batch));
        for (int i = 0; i < config.batch; ++i) rewards[static_cast<size_t>(i)] = reward_fn.eval_vector(x0_val, i);

        // fake score catches up on the current generator outputs (reward-
        // discounted when tilt weighting is active)
        std::vector<double> fake_weights;
        if (config.use_reward_weighting) {
            fake_weights = fake_discount_weights(rewards, config.beta, 1);
        }
        double fake_loss = 0.0;
        for (int i = 0; i < config.fake_updates_per_gen; ++i) {
            fake_loss = train_fake_score(s_fake, x0_val, schedule, rng, config.fake_lr, fake_weights);
        }

        const double t = draw_interior_t(schedule, rng);
        Matrix g = config.use_reward_weighting
                       ? redmd_gradient(x0_val, rewards, config.beta, t, s_real, s_fake, schedule, rng)
                       : dmd_gradient(x0_val, t, s_real, s_fake, schedule, rng);

        NodeId surrogate = tape.dot_with(x0, sdm::scale(g, 1.0 / config.batch));
        Gradients grads = tape.backward(surrogate);
        std::vector<Matrix> grad_values = {grads.at(a_node), grads.at(b_node)};
        gen_opt.step(decayed_lr(config, step), gen.parameters(),
                     {&grad_values[0], &grad_values[1]});

        if (!gen.parameters_finite() || !s_fake.parameters_finite()) {
            throw DivergenceError("distill: non-finite parameter at step " + std::to_string(step));
        }

        StepRecord rec;
        rec.step = step;
        rec.t = t;
        rec.grad_norm = grad_norm_of(grad_values);
        rec.fake_loss = fake_loss;
        double mr = 0.0;
        for (double r : rewards) mr += r;
        rec.mean_reward = mr / static_cast<double>(rewards.size());
        if (config.use_reward_weighting) {
            fill_weight_stats(rec, compute_weights(rewards, config.beta).weights);
        }
        batch_moments(x0_val, rec.gen_mean, rec.gen_std);
        emit(jsonl, rec);
        log.records.push_back(std::move(rec));
    }
    return log;
}

namespace {

double eval_dynamics(const Generator& gen, const EmaSinkConfig& cache_cfg,
                     const NoiseSchedule& schedule, const DistillConfig& config,
                     const Matrix& conditioning) {
    const uint64_t eval_root = stream_seed(config.seed, "eval");
    double total = 0.0;
    for (int s = 0; s < config.eval_sequences; ++s) {
        StreamState stream(cache_cfg, conditioning, mix_seed(eval_root, static_cast<uint64_t>(s)));
        auto chunks = generate(gen, stream, schedule, config.eval_chunks);
        total += dynamics_degree(chunks);
    }
    return total / static_cast<double>(config.eval_sequences);
}

}  // namespace

TrainingLog distill_loop(Generator& gen, const EmaSinkConfig& cache_cfg, const ScoreModel& s_real,
                         ScoreModel& s_fake, const RewardFunction& reward_fn,
                         const DistillConfig& config, const NoiseSchedule& schedule,
                         std::ostream* jsonl) {
    config.validate();
    schedule.validate();
    if (reward_fn.kind == RewardFunction::Kind::Linear) {
        throw ContractError("distill: linear reward is for gaussian mode");
    }
    if (cache_cfg.tokens_per_chunk != gen.cfg.tokens_per_chunk ||
        cache_cfg.head_dim != gen.cfg.head_dim || cache_cfg.n_heads != gen.cfg.n_heads) {
        throw ConfigError("distill: cache and generator geometry disagree");
    }
    const int t_rows = gen.cfg.tokens_per_chunk;
    Matrix conditioning(1, gen.cfg.cond_dim);
    if (gen.cfg.cond_dim > 0) conditioning(0, 0) = 1.0;

    Rng rng(stream_seed(config.seed, "distill-loop"));
    Adam gen_opt;
    TrainingLog log;

    // weight averaging for checkpoint evaluation and the shipped parameters
    std::vector<Matrix> ema;
    if (config.eval_ema_decay > 0.0) {
        for (const Matrix* p : static_cast<const Generator&>(gen).parameters()) ema.push_back(*p);
    }
    auto ema_update = [&]() {
        if (ema.empty()) return;
        const double d = config.eval_ema_decay;
        auto params = gen.parameters();
        for (size_t k = 0; k < params.size(); ++k) {
            for (size_t i = 0; i < ema[k].data.size(); ++i) {
                ema[k].data[i] = d * ema[k].data[i] + (1.0 - d) * params[k]->data[i];
            }
        }
    };
    auto eval_generator = [&]() {
        Generator eval_gen = gen;
        if (!ema.empty()) {
            auto params = eval_gen.parameters();
            for (size_t k = 0; k < params.size(); ++k) *params[k] = ema[k];
        }
        return eval_gen;
    };

    const uint64_t warmup_root = stream_seed(config.seed, "warmup");
    for (int wb = 0; wb < config.fake_warmup_batches; ++wb) {
        Matrix x0(config.batch * t_rows, gen.cfg.data_dim);
        for (int b = 0; b < config.batch; ++b) {
            StreamState stream(cache_cfg, conditioning,
                               mix_seed(mix_seed(warmup_root, static_cast<uint64_t>(wb)),
                                        static_cast<uint64_t>(b)));
            auto chunks = generate(gen, stream, schedule, config.n_chunks);
            const Matrix& tok = chunks[static_cast<size_t>(rng.uniform_int(config.n_chunks))].tokens;
            for (int r = 0; r < t_rows; ++r) {
                for (int j = 0; j < gen.cfg.data_dim; ++j) x0(b * t_rows + r, j) = tok(r, j);
            }
        }
        for (int i = 0; i < config.fake_updates_per_gen; ++i) {
            train_fake_score(s_fake, x0, schedule, rng, config.fake_lr);
        }
    }

    for (int step = 0; step < config.steps; ++step) {
        // one self-rollout per batch element; gradient flows through one
        // randomly selected chunk of each
        std::vector<Tape> tapes(static_cast<size_t>(config.batch));
        std::vector<NodeId> traced_nodes(static_cast<size_t>(config.batch));
        std::vector<StagedGenerator> staged(static_cast<size_t>(config.batch));
        std::vector<double> rewards(static_cast<size_t>(config.batch));
        Matrix x0_batch(config.batch * t_rows, gen.cfg.data_dim);

        for (int b = 0; b < config.batch; ++b) {
            const uint64_t stream_seed_b =
                mix_seed(mix_seed(config.seed, static_cast<uint64_t>(step)), static_cast<uint64_t>(b));
            StreamState stream(cache_cfg, conditioning, stream_seed_b);
            const int train_chunk = rng.uniform_int(config.n_chunks);

            std::vector<FrameChunk> chunks;
            for (int c = 0; c < config.n_chunks; ++c) {
                if (c == train_chunk) {
                    staged[static_cast<size_t>(b)] = stage_generator(tapes[static_cast<size_t>(b)], gen, true);
                    TracedChunk traced = rollout_chunk_traced(tapes[static_cast<size_t>(b)],
                                                              staged[static_cast<size_t>(b)], gen,
                                                              stream, schedule);
                    traced_nodes[static_cast<size_t>(b)] = traced.x0;
                    chunks.push_back(traced.chunk);
                } else {
                    chunks.push_back(rollout_chunk(gen, stream, schedule));
                }
            }
            rewards[static_cast<size_t>(b)] = reward_fn.eval_sequence(chunks);

            const Matrix& clean = tapes[static_cast<size_t>(b)].value(traced_nodes[static_cast<size_t>(b)]);
            for (int r = 0; r < t_rows; ++r) {
                for (int j = 0; j < gen.cfg.data_dim; ++j) x0_batch(b * t_rows + r, j) = clean(r, j);
            }
        }

        std::vector<double> fake_weights;
        if (config.use_reward_weighting) {
            fake_weights = fake_discount_weights(rewards, config.beta, t_rows);
        }
        double fake_loss = 0.0;
        for (int i = 0; i < config.fake_updates_per_gen; ++i) {
            fake_loss = train_fake_score(s_fake, x0_batch, schedule, rng, config.fake_lr, fake_weights);
        }

        const double t = draw_interior_t(schedule, rng);
        Matrix g = config.use_reward_weighting
                       ? redmd_gradient(x0_batch, rewards, config.beta, t, s_real, s_fake, schedule,
                                        rng, t_rows)
                       : dmd_gradient(x0_batch, t, s_real, s_fake, schedule, rng);
        g = sdm::scale(g, 1.0 / static_cast<double>(x0_batch.rows));

        // accumulate parameter gradients across the per-sample tapes
        std::vector<Matrix*> params = gen.trainable_parameters();
        std::vector<Matrix> grad_acc;
        for (Matrix* p : params) grad_acc.push_back(Matrix(p->rows, p->cols));
        for (int b = 0; b < config.batch; ++b) {
            Matrix g_b = slice_rows(g, b * t_rows, (b + 1) * t_rows);
            Tape& tape = tapes[static_cast<size_t>(b)];
            NodeId surrogate = tape.dot_with(traced_nodes[static_cast<size_t>(b)], g_b);
            Gradients grads = tape.backward(surrogate);
            const auto& nodes = staged[static_cast<size_t>(b)].trainable_nodes;
            for (size_t k = 0; k < nodes.size(); ++k) {
                grad_acc[k] = add(grad_acc[k], grads.at(nodes[k]));
            }
        }
        std::vector<const Matrix*> grad_ptrs;
        for (const Matrix& m : grad_acc) grad_ptrs.push_back(&m);
        gen_opt.step(decayed_lr(config, step), params, grad_ptrs);
        ema_update();

        if (!gen.parameters_finite() || !s_fake.parameters_finite()) {
            throw DivergenceError("distill: non-finite parameter at step " + std::to_string(step));
        }

        StepRecord rec;
        rec.step = step;
        rec.t = t;
        rec.grad_norm = grad_norm_of(grad_acc);
        rec.fake_loss = fake_loss;
        double mr = 0.0;
        for (double r : rewards) mr += r;
        rec.mean_reward = mr / static_cast<double>(rewards.size());
        if (config.use_reward_weighting) {
            fill_weight_stats(rec, compute_weights(rewards, config.beta).weights);
        }
        batch_moments(x0_batch, rec.gen_mean, rec.gen_std);

        if (step % config.eval_every == 0 || step + 1 == config.steps) {
            const double dyn =
                eval_dynamics(eval_generator(), cache_cfg, schedule, config, conditioning);
            rec.dynamics = dyn;
            log.dynamics_checkpoints.push_back({step, dyn});
        }
        emit(jsonl, rec);
        log.records.push_back(std::move(rec));
    }
    if (!ema.empty()) {
        // ship the averaged weights
        auto params = gen.parameters();
        for (size_t k = 0; k < params.size(); ++k) *params[k] = ema[k];
    }
    return log;
}

// ---------------------------------------------------------------------------
// checkpoints

static constexpr char kCheckpointMagic[4] = {'S', 'D', 'M', 'C'};
static constexpr uint32_t kCheckpointVersion = 1;

static void write_params(std::ostream& os, const std::vector<const Matrix*>& params) {
    write_u64(os, params.size());
    for (const Matrix* p : params) write_matrix(os, *p);
}

static void read_params_into(std::istream& is, const std::vector<Matrix*>& params) {
    const uint64_t n = read_u64(is);
    if (n != params.size()) throw IoError("checkpoint: parameter count mismatch");
    for (Matrix* p : params) {
        Matrix m = read_matrix(is);
        if (!m.same_shape(*p)) throw IoError("checkpoint: parameter shape mismatch");
        *p = std::move(m);
    }
}

void save_checkpoint(const std::string& path, const Generator* velocity,
                     const AffineGenerator* affine, const ScoreModel* fake) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
    os.write(kCheckpointMagic, 4);
    write_u32(os, kCheckpointVersion);
    uint32_t flags = 0;
    if (velocity != nullptr) flags |= 1;
    if (affine != nullptr) flags |= 2;
    if (fake != nullptr) flags |= 4;
    write_u32(os, flags);

    if (velocity != nullptr) {
        const GeneratorConfig& c = velocity->cfg;
        write_u32(os, static_cast<uint32_t>(c.data_dim));
        write_u32(os, static_cast<uint32_t>(c.cond_dim));
        write_u32(os, static_cast<uint32_t>(c.hidden));
        write_u32(os, static_cast<uint32_t>(c.tokens_per_chunk));
        write_u32(os, static_cast<uint32_t>(c.n_heads));
        write_u32(os, static_cast<uint32_t>(c.head_dim));
        write_f64(os, c.rope_base);
        write_params(os, velocity->parameters());
    }
    if (affine != nullptr) {
        write_u32(os, static_cast<uint32_t>(affine->a.rows));
        write_params(os, affine->parameters());
    }
    if (fake != nullptr) {
        if (fake->kind() != ScoreModel::Kind::Learned) {
            throw ContractError("checkpoint: only learned score models are saved");
        }
        write_u32(os, static_cast<uint32_t>(fake->dim()));
        std::vector<const Matrix*> params = fake->parameters();
        // hidden width recoverable from the first correction layer
        write_u32(os, static_cast<uint32_t>(params[2]->cols));
        write_params(os, params);
    }
    if (!os) throw IoError("checkpoint: write failure");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != std::string(kCheckpointMagic, 4)) {
        throw IoError("checkpoint: bad magic");
    }
    if (read_u32(is) != kCheckpointVersion) throw IoError("checkpoint: unsupported version");
    const uint32_t flags = read_u32(is);

    LoadedCheckpoint out;
    Rng dummy(0);
    if (flags & 1) {
        GeneratorConfig c;
        c.data_dim = static_cast<int>(read_u32(is));
        c.cond_dim = static_cast<int>(read_u32(is));
        c.hidden = static_cast<int>(read_u32(is));
        c.tokens_per_chunk = static_cast<int>(read_u32(is));
        c.n_heads = static_cast<int>(read_u32(is));
        c.head_dim = static_cast<int>(read_u32(is));
        c.rope_base = read_f64(is);
        Generator g = Generator::init(c, dummy);
        read_params_into(is, g.parameters());
        out.velocity = std::move(g);
    }
    if (flags & 2) {
        const int dim = static_cast<int>(read_u32(is));
        AffineGenerator g = AffineGenerator::identity_init(dim);
        read_params_into(is, g.parameters());
        out.affine = std::move(g);
    }
    if (flags & 4) {
        const int dim = static_cast<int>(read_u32(is));
        const int hidden = static_cast<int>(read_u32(is));
        ScoreModel fake = ScoreModel::learned(dim, hidden, dummy);
        read_params_into(is, fake.parameters());
        out.fake = std::move(fake);
    }
    return out;
}

}  // namespace sdm
