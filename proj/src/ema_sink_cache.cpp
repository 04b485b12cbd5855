#include "sdm/ema_sink_cache.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "sdm/error.hpp"
#include "sdm/serialize.hpp"

namespace sdm {

static constexpr char kSnapshotMagic[4] = {'E', 'M', 'S', 'K'};
static constexpr uint32_t kSnapshotVersion = 1;

void EmaSinkConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("cache: alpha must be in (0, 1)");
    if (window_size < 1) throw ConfigError("cache: window_size must be >= 1");
    if (tokens_per_chunk < 1) throw ConfigError("cache: tokens_per_chunk must be >= 1");
    if (head_dim < 2 || head_dim % 2 != 0) throw ConfigError("cache: head_dim must be even and >= 2");
    if (n_heads < 1) throw ConfigError("cache: n_heads must be >= 1");
    if (rope_base <= 0.0) throw ConfigError("cache: rope_base must be positive");
}

EmaSinkCache::EmaSinkCache(const EmaSinkConfig& config) : config_(config) {
    config_.validate();
    ring_.resize(static_cast<size_t>(config_.window_size));
}

EmaSinkCache::ChunkEntry& EmaSinkCache::slot(size_t logical) {
    return ring_[(head_ + logical) % ring_.size()];
}

const EmaSinkCache::ChunkEntry& EmaSinkCache::slot(size_t logical) const {
    return ring_[(head_ + logical) % ring_.size()];
}

void EmaSinkCache::append_chunk(const Matrix& k_new, const Matrix& v_new, int64_t start_position) {
    const int t = config_.tokens_per_chunk;
    if (k_new.rows != t || v_new.rows != t || k_new.cols != config_.kv_cols() ||
        v_new.cols != config_.kv_cols()) {
        throw ShapeError("append_chunk: expected " + std::to_string(t) + "x" +
                         std::to_string(config_.kv_cols()) + " K/V blocks");
    }
    if (start_position <= last_start_position_) {
        throw ContractError("append_chunk: start_position must increase strictly");
    }

    std::vector<int64_t> positions(static_cast<size_t>(t));
    std::iota(positions.begin(), positions.end(), start_position);
    const RopeParams rp{config_.head_dim, config_.rope_base};

    ChunkEntry entry;
    entry.keys = rope_rotate(k_new, positions, rp);
    entry.values = v_new;
    entry.start_position = start_position;

    if (!sink_.initialized) {
        sink_.keys = entry.keys;
        sink_.values = entry.values;
        sink_.initialized = true;
    }
    if (count_ == ring_.size()) evict_and_fuse();

    slot(count_) = std::move(entry);
    ++count_;
    last_start_position_ = start_position;
}

void EmaSinkCache::evict_and_fuse() {
    if (count_ < ring_.size()) {
        throw ContractError("evict_and_fuse: window not full");
    }
    ChunkEntry& oldest = ring_[head_];
    const double a = config_.alpha;
    for (size_t i = 0; i < sink_.keys.data.size(); ++i) {
        sink_.keys.data[i] = a * sink_.keys.data[i] + (1.0 - a) * oldest.keys.data[i];
        sink_.values.data[i] = a * sink_.values.data[i] + (1.0 - a) * oldest.values.data[i];
    }
    oldest.keys = Matrix();
    oldest.values = Matrix();
    head_ = (head_ + 1) % ring_.size();
    --count_;
    ++sink_.eviction_count;
}

int EmaSinkCache::total_rows() const {
    if (!sink_.initialized) return 0;
    return config_.sink_len() + static_cast<int>(count_) * config_.tokens_per_chunk;
}

EmaSinkCache::GlobalKv EmaSinkCache::global_kv() const {
    if (!sink_.initialized) throw ContractError("global_kv: empty cache");
    GlobalKv g;
    g.sink_rows = config_.sink_len();
    g.keys = sink_.keys;
    g.values = sink_.values;
    for (size_t c = 0; c < count_; ++c) {
        const ChunkEntry& e = slot(c);
        g.keys = concat_rows(g.keys, e.keys);
        g.values = concat_rows(g.values, e.values);
        for (int r = 0; r < config_.tokens_per_chunk; ++r) {
            g.window_positions.push_back(e.start_position + r);
        }
    }
    return g;
}

std::vector<const EmaSinkCache::ChunkEntry*> EmaSinkCache::window_entries() const {
    std::vector<const ChunkEntry*> out;
    for (size_t c = 0; c < count_; ++c) out.push_back(&slot(c));
    return out;
}

NodeId EmaSinkCache::attend_on_tape(Tape& tape, NodeId queries,
                                    const std::vector<int64_t>& q_positions, double scale,
                                    bool include_sink) const {
    if (!sink_.initialized) throw ContractError("attend: empty cache");
    const Matrix& q = tape.value(queries);
    if (q.rows != static_cast<int>(q_positions.size())) {
        throw ShapeError("attend: query rows vs positions length");
    }
    if (q.cols != config_.kv_cols()) {
        throw ShapeError("attend: query cols must be n_heads*head_dim");
    }
    if (scale <= 0.0) scale = 1.0 / std::sqrt(static_cast<double>(config_.head_dim));

    const GlobalKv g = global_kv();
    const int n_kv = g.keys.rows;
    const int sink_rows = g.sink_rows;
    const int n_q = q.rows;

    // Visibility: sink rows per include_sink, window rows causally.
    Matrix mask(n_q, n_kv);
    for (int i = 0; i < n_q; ++i) {
        for (int j = 0; j < sink_rows; ++j) mask(i, j) = include_sink ? 1.0 : 0.0;
        for (int j = sink_rows; j < n_kv; ++j) {
            mask(i, j) = (g.window_positions[static_cast<size_t>(j - sink_rows)] <= q_positions[static_cast<size_t>(i)])
                             ? 1.0
                             : 0.0;
        }
    }
    NodeId mask_node = tape.leaf(mask, false);

    const RopeParams rp{config_.head_dim, config_.rope_base};
    NodeId q_rot = tape.rope(queries, q_positions, rp);

    NodeId out{-1};
    const int d = config_.head_dim;
    for (int h = 0; h < config_.n_heads; ++h) {
        NodeId qh = tape.slice_cols(q_rot, h * d, (h + 1) * d);
        Matrix kh_t = transpose(slice_cols(g.keys, h * d, (h + 1) * d));
        Matrix vh = slice_cols(g.values, h * d, (h + 1) * d);
        NodeId logits = tape.scale(tape.matmul(qh, tape.leaf(std::move(kh_t), false)), scale);
        NodeId probs = tape.softmax_rows_masked(logits, mask_node);
        NodeId head_out = tape.matmul(probs, tape.leaf(std::move(vh), false));
        out = (h == 0) ? head_out : tape.concat_cols(out, head_out);
    }
    return out;
}

Matrix EmaSinkCache::attend(const Matrix& queries, const std::vector<int64_t>& q_positions,
                            double scale, bool include_sink) const {
    Tape tape;
    NodeId q = tape.leaf(queries, false);
    NodeId out = attend_on_tape(tape, q, q_positions, scale, include_sink);
    return tape.value(out);
}

size_t EmaSinkCache::memory_footprint() const {
    size_t data_bytes = (sink_.keys.size() + sink_.values.size()) * sizeof(double);
    for (size_t c = 0; c < count_; ++c) {
        const ChunkEntry& e = slot(c);
        data_bytes += (e.keys.size() + e.values.size()) * sizeof(double);
    }
    const size_t overhead = sizeof(EmaSinkCache) + ring_.capacity() * sizeof(ChunkEntry);
    return data_bytes + overhead;
}

void EmaSinkCache::save_snapshot(std::ostream& os) const {
    os.write(kSnapshotMagic, 4);
    write_u32(os, kSnapshotVersion);
    write_f64(os, config_.alpha);
    write_u32(os, static_cast<uint32_t>(config_.window_size));
    write_u32(os, static_cast<uint32_t>(config_.tokens_per_chunk));
    write_u32(os, static_cast<uint32_t>(config_.head_dim));
    write_u32(os, static_cast<uint32_t>(config_.n_heads));
    write_f64(os, config_.rope_base);

    write_u32(os, sink_.initialized ? 1 : 0);
    write_u64(os, sink_.eviction_count);
    write_i64(os, last_start_position_);
    if (sink_.initialized) {
        write_matrix(os, sink_.keys);
        write_matrix(os, sink_.values);
    }
    write_u32(os, static_cast<uint32_t>(count_));
    for (size_t c = 0; c < count_; ++c) {
        const ChunkEntry& e = slot(c);
        write_i64(os, e.start_position);
        write_matrix(os, e.keys);
        write_matrix(os, e.values);
    }
    if (!os) throw IoError("snapshot: write failure");
}

EmaSinkCache EmaSinkCache::load_snapshot(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != std::string(kSnapshotMagic, 4)) {
        throw IoError("snapshot: bad magic");
    }
    const uint32_t version = read_u32(is);
    if (version != kSnapshotVersion) {
        throw IoError("snapshot: unsupported version " + std::to_string(version));
    }
    EmaSinkConfig cfg;
    cfg.alpha = read_f64(is);
    cfg.window_size = static_cast<int>(read_u32(is));
    cfg.tokens_per_chunk = static_cast<int>(read_u32(is));
    cfg.head_dim = static_cast<int>(read_u32(is));
    cfg.n_heads = static_cast<int>(read_u32(is));
    cfg.rope_base = read_f64(is);

    EmaSinkCache cache(cfg);
    const bool initialized = read_u32(is) != 0;
    cache.sink_.eviction_count = read_u64(is);
    cache.last_start_position_ = read_i64(is);
    if (initialized) {
        cache.sink_.keys = read_matrix(is);
        cache.sink_.values = read_matrix(is);
        cache.sink_.initialized = true;
    }
    const uint32_t entries = read_u32(is);
    if (entries > static_cast<uint32_t>(cfg.window_size)) throw IoError("snapshot: too many entries");
    for (uint32_t c = 0; c < entries; ++c) {
        ChunkEntry e;
        e.start_position = read_i64(is);
        e.keys = read_matrix(is);
        e.values = read_matrix(is);
        cache.ring_[c] = std::move(e);
    }
    cache.head_ = 0;
    cache.count_ = entries;
    return cache;
}

void EmaSinkCache::save_snapshot_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("snapshot: cannot open " + path + " for writing");
    save_snapshot(os);
}

EmaSinkCache EmaSinkCache::load_snapshot_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("snapshot: cannot open " + path);
    return load_snapshot(is);
}

bool EmaSinkCache::state_equals(const EmaSinkCache& other) const {
    if (sink_.initialized != other.sink_.initialized) return false;
    if (sink_.eviction_count != other.sink_.eviction_count) return false;
    if (count_ != other.count_) return false;
    if (last_start_position_ != other.last_start_position_) return false;
    if (sink_.initialized) {
        if (!(sink_.keys == other.sink_.keys) || !(sink_.values == other.sink_.values)) return false;
    }
    for (size_t c = 0; c < count_; ++c) {
        const ChunkEntry& a = slot(c);
        const ChunkEntry& b = other.slot(c);
        if (a.start_position != b.start_position) return false;
        if (!(a.keys == b.keys) || !(a.values == b.values)) return false;
    }
    return true;
}

}  // namespace sdm
