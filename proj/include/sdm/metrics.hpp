#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sdm/matrix.hpp"
#include "sdm/rollout.hpp"

namespace sdm {

// Per-video clip quality scores; one inner list per video, ordered by clip.
using ClipScores = std::vector<std::vector<double>>;

// Sample standard deviation of one video's clip scores. Needs >= 2 clips.
double video_drift(const std::vector<double>& clip_scores);

// Mean of the per-video drifts.
double drift(const ClipScores& scores);

// Unsaturated mean displacement between consecutive chunk token means; the
// raw motion statistic.
double dynamics_degree(const std::vector<FrameChunk>& chunks);

// Energy distance estimate between two sample sets (rows are samples):
// 2 E||a-b|| - E||a-a'|| - E||b-b'||. Zero for equal distributions in the
// large-sample limit, symmetric in its arguments.
double energy_distance(const Matrix& samples_a, const Matrix& samples_b);

// CSV interfaces: rows `video_id,clip_index,score` in, `video_id,drift` out.
ClipScores read_clip_scores_csv(std::istream& is);
ClipScores read_clip_scores_csv_file(const std::string& path);
void write_drift_csv(std::ostream& os, const std::vector<std::string>& video_ids,
                     const std::vector<double>& drifts);

}  // namespace sdm
