#include "sdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sdm/error.hpp"

namespace sdm {

double video_drift(const std::vector<double>& clip_scores) {
    const size_t m = clip_scores.size();
    if (m < 2) throw ContractError("drift: need at least 2 clips per video");
    double mean = 0.0;
    for (double s : clip_scores) mean += s;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double s : clip_scores) ss += (s - mean) * (s - mean);
    return std::sqrt(ss / static_cast<double>(m - 1));
}

double drift(const ClipScores& scores) {
    if (scores.empty()) throw ContractError("drift: no videos");
    double total = 0.0;
    for (const auto& v : scores) total += video_drift(v);
    return total / static_cast<double>(scores.size());
}

double dynamics_degree(const std::vector<FrameChunk>& chunks) {
    if (chunks.size() < 2) throw ContractError("dynamics_degree: need at least 2 chunks");
    double total = 0.0;
    for (size_t c = 1; c < chunks.size(); ++c) {
        const Matrix& prev = chunks[c - 1].tokens;
        const Matrix& cur = chunks[c].tokens;
        if (prev.cols != cur.cols) throw ShapeError("dynamics_degree: chunk dims differ");
        double sq = 0.0;
        for (int j = 0; j < cur.cols; ++j) {
            double mp = 0.0, mc = 0.0;
            for (int r = 0; r < prev.rows; ++r) mp += prev(r, j);
            for (int r = 0; r < cur.rows; ++r) mc += cur(r, j);
            mp /= prev.rows;
            mc /= cur.rows;
            sq += (mc - mp) * (mc - mp);
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(chunks.size() - 1);
}

double energy_distance(const Matrix& samples_a, const Matrix& samples_b) {
    if (samples_a.rows < 1 || samples_b.rows < 1) {
        throw ContractError("energy_distance: empty sample set");
    }
    if (samples_a.cols != samples_b.cols) {
        throw ShapeError("energy_distance: dimension mismatch");
    }
    // canonical argument order so the summation order (and therefore the
    // floating-point result) is exactly symmetric in the inputs
    if (samples_b.rows > samples_a.rows ||
        (samples_b.rows == samples_a.rows &&
         std::lexicographical_compare(samples_b.data.begin(), samples_b.data.end(),
                                      samples_a.data.begin(), samples_a.data.end()))) {
        return energy_distance(samples_b, samples_a);
    }
    const int dim = samples_a.cols;
    auto pair_dist = [dim](const Matrix& x, int i, const Matrix& y, int j) {
        double sq = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double diff = x(i, d) - y(j, d);
            sq += diff * diff;
        }
        return std::sqrt(sq);
    };

    const int n = samples_a.rows;
    const int m = samples_b.rows;
    double cross = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) cross += pair_dist(samples_a, i, samples_b, j);
    }
    double within_a = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) within_a += pair_dist(samples_a, i, samples_a, j);
    }
    double within_b = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) within_b += pair_dist(samples_b, i, samples_b, j);
    }
    return 2.0 * cross / (static_cast<double>(n) * m) -
           2.0 * within_a / (static_cast<double>(n) * n) -
           2.0 * within_b / (static_cast<double>(m) * m);
}

ClipScores read_clip_scores_csv(std::istream& is) {
    std::map<std::string, std::map<long, double>> by_video;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (first && line.find("video_id") != std::string::npos) {
            first = false;
            continue;  // header
        }
        first = false;
        std::stringstream ss(line);
        std::string id, clip_str, score_str;
        if (!std::getline(ss, id, ',') || !std::getline(ss, clip_str, ',') ||
            !std::getline(ss, score_str)) {
            throw IoError("clip scores csv: malformed line: " + line);
        }
        by_video[id][std::stol(clip_str)] = std::stod(score_str);
    }
    ClipScores out;
    for (const auto& [id, clips] : by_video) {
        std::vector<double> scores;
        for (const auto& [idx, s] : clips) scores.push_back(s);
        out.push_back(std::move(scores));
    }
    return out;
}

ClipScores read_clip_scores_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return read_clip_scores_csv(is);
}

void write_drift_csv(std::ostream& os, const std::vector<std::string>& video_ids,
                     const std::vector<double>& drifts) {
    if (video_ids.size() != drifts.size()) throw ContractError("drift csv: id/value count mismatch");
    os << "video_id,drift\n";
    for (size_t i = 0; i < video_ids.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", drifts[i]);
        os << video_ids[i] << "," << buf << "\n";
    }
}

}  // namespace sdm
