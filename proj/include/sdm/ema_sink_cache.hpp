#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdm/matrix.hpp"
#include "sdm/rope.hpp"
#include "sdm/tape.hpp"

namespace sdm {

struct EmaSinkConfig {
    double alpha = 0.99;      // EMA decay; the old sink keeps alpha, the evicted chunk gets 1-alpha
    int window_size = 9;      // sliding window capacity, in chunks
    int tokens_per_chunk = 3;
    int head_dim = 16;
    int n_heads = 4;
    double rope_base = 10000.0;

    int sink_len() const { return tokens_per_chunk; }  // sink holds one chunk's worth of rows
    int kv_cols() const { return n_heads * head_dim; }
    void validate() const;
};

// Compressed global-context key/value rows, updated by exponential moving
// average each time a chunk leaves the window. Initialized verbatim from the
// first chunk's rotated K/V; shapes never change afterwards.
struct SinkState {
    Matrix keys;    // [sink_len x n_heads*head_dim]
    Matrix values;  // same shape
    bool initialized = false;
    uint64_t eviction_count = 0;
};

// Streaming causal attention cache: a ring buffer of the most recent chunks
// plus EMA-fused sink rows standing in for everything older. Keys are stored
// rotated (position applied at write time) so eviction never re-rotates
// history and runs in time independent of how much has been generated.
//
// One cache per stream, single writer. Total live storage is constant once
// the window has filled, regardless of sequence length.
class EmaSinkCache {
public:
    explicit EmaSinkCache(const EmaSinkConfig& config);

    // Appends one chunk of freshly projected K/V rows starting at the given
    // absolute token position. Keys are rotated here. If the window is full
    // the oldest chunk is first fused into the sink; the first chunk ever
    // also initializes the sink.
    void append_chunk(const Matrix& k_new, const Matrix& v_new, int64_t start_position);

    // Folds the oldest chunk into the sink and removes it. Callable directly
    // only when the window is full.
    void evict_and_fuse();

    // Sink rows followed by window rows in ascending start position.
    struct GlobalKv {
        Matrix keys;
        Matrix values;
        std::vector<int64_t> window_positions;  // absolute position per window row
        int sink_rows = 0;
    };
    GlobalKv global_kv() const;

    // Causal attention of the given queries against the cache, per head:
    // softmax(rotate(Q) K^T * scale) V. Sink rows are always visible; window
    // rows with position greater than the query position get weight exactly
    // zero. scale <= 0 selects the default 1/sqrt(head_dim).
    Matrix attend(const Matrix& queries, const std::vector<int64_t>& q_positions,
                  double scale = 0.0, bool include_sink = true) const;

    // Same attention as a differentiable tape computation; cache contents
    // enter as constants. Used by the generator's context readout.
    NodeId attend_on_tape(Tape& tape, NodeId queries, const std::vector<int64_t>& q_positions,
                          double scale = 0.0, bool include_sink = true) const;

    // Exact live value storage in bytes plus fixed bookkeeping overhead.
    // Constant after the window first fills.
    size_t memory_footprint() const;

    bool empty() const { return !sink_.initialized; }
    int window_chunks() const { return static_cast<int>(count_); }
    int total_rows() const;
    uint64_t eviction_count() const { return sink_.eviction_count; }
    const EmaSinkConfig& config() const { return config_; }
    const SinkState& sink() const { return sink_; }
    int64_t last_start_position() const { return last_start_position_; }

    struct ChunkEntry {
        Matrix keys;    // rotated at write time
        Matrix values;
        int64_t start_position = 0;
    };
    // Window entries in ascending start position (oldest first).
    std::vector<const ChunkEntry*> window_entries() const;

    // Versioned binary snapshot (magic "EMSK", little-endian) for
    // checkpoint/resume of streaming runs.
    void save_snapshot(std::ostream& os) const;
    static EmaSinkCache load_snapshot(std::istream& is);
    void save_snapshot_file(const std::string& path) const;
    static EmaSinkCache load_snapshot_file(const std::string& path);

    bool state_equals(const EmaSinkCache& other) const;

private:
    EmaSinkConfig config_;
    SinkState sink_;
    std::vector<ChunkEntry> ring_;
    size_t head_ = 0;   // index of oldest entry
    size_t count_ = 0;  // live entries
    int64_t last_start_position_ = -1;

    ChunkEntry& slot(size_t logical);
    const ChunkEntry& slot(size_t logical) const;
};

}  // namespace sdm
