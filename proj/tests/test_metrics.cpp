#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sdm/error.hpp"
#include "sdm/metrics.hpp"
#include "sdm/rng.hpp"

using namespace sdm;

TEST_CASE("drift hand values") {
    CHECK(video_drift({5.0, 5.0, 5.0, 5.0}) == 0.0);
    CHECK(video_drift({1.0, 2.0, 3.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(drift({{1.0, 2.0, 3.0}, {2.0, 2.0, 2.0}}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(video_drift({1.0}), ContractError);
}

TEST_CASE("drift is translation invariant and scales linearly") {
    Rng rng(stream_seed(61, "drift-props"));
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> scores;
        const int m = 2 + rng.uniform_int(10);
        for (int i = 0; i < m; ++i) scores.push_back(rng.normal() * 4.0);
        const double base = video_drift(scores);

        std::vector<double> shifted = scores, scaled = scores;
        const double c = rng.normal() * 10.0;
        const double k = 0.25 + rng.uniform() * 4.0;
        for (double& s : shifted) s += c;
        for (double& s : scaled) s *= k;
        CHECK(std::abs(video_drift(shifted) - base) < 1e-9);
        CHECK(std::abs(video_drift(scaled) - k * base) < 1e-9);
    }
}

TEST_CASE("dynamics degree hand values") {
    Matrix tok(2, 2);
    std::vector<FrameChunk> still = {{tok, 0}, {tok, 2}};
    CHECK(dynamics_degree(still) == 0.0);

    std::vector<FrameChunk> unit;
    for (int c = 0; c < 5; ++c) {
        Matrix t2(2, 2);
        for (int r = 0; r < 2; ++r) t2(r, 0) = c;
        unit.push_back({t2, static_cast<int64_t>(2 * c)});
    }
    CHECK(dynamics_degree(unit) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<FrameChunk> doubled = unit;
    for (auto& ch : doubled) ch.tokens = scale(ch.tokens, 2.0);
    CHECK(dynamics_degree(doubled) == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(dynamics_degree({unit[0]}), ContractError);
}

TEST_CASE("energy distance basics") {
    Rng rng(stream_seed(62, "energy-basic"));
    Matrix a = rng.normal_matrix(50, 2);
    CHECK(std::abs(energy_distance(a, a)) < 1e-12);

    Matrix b = rng.normal_matrix(40, 2);
    CHECK(energy_distance(a, b) == energy_distance(b, a));

    Matrix c = rng.normal_matrix(10, 3);
    CHECK_THROWS_AS(energy_distance(a, c), ShapeError);
}

TEST_CASE("energy distance matches a naive double-loop oracle") {
    Rng rng(stream_seed(63, "energy-oracle"));
    Matrix a = rng.normal_matrix(200, 1);
    Matrix b = rng.normal_matrix(180, 1);
    for (int i = 0; i < b.rows; ++i) b(i, 0) += 3.0;

    const double got = energy_distance(a, b);

    // full O(n^2) reference including self pairs
    auto dist = [](const Matrix& x, int i, const Matrix& y, int j) {
        return std::abs(x(i, 0) - y(j, 0));
    };
    double cross = 0.0, aa = 0.0, bb = 0.0;
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.rows; ++j) cross += dist(a, i, b, j);
    }
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.rows; ++j) aa += dist(a, i, a, j);
    }
    for (int i = 0; i < b.rows; ++i) {
        for (int j = 0; j < b.rows; ++j) bb += dist(b, i, b, j);
    }
    const double expect = 2.0 * cross / (static_cast<double>(a.rows) * b.rows) -
                          aa / (static_cast<double>(a.rows) * a.rows) -
                          bb / (static_cast<double>(b.rows) * b.rows);
    CHECK(std::abs(got - expect) < 1e-10);
}

TEST_CASE("energy distance between resamples of one distribution shrinks") {
    Rng rng(stream_seed(64, "energy-shrink"));
    double prev = 1e9;
    for (int n : {100, 1000, 10000}) {
        Matrix a = rng.normal_matrix(n, 2);
        Matrix b = rng.normal_matrix(n, 2);
        const double d = std::abs(energy_distance(a, b));
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("clip score csv round trip") {
    std::stringstream csv;
    csv << "video_id,clip_index,score\n";
    csv << "vid_b,1,2.0\nvid_b,0,1.0\nvid_b,2,3.0\n";
    csv << "vid_a,0,4.0\nvid_a,1,4.0\n";
    ClipScores scores = read_clip_scores_csv(csv);
    REQUIRE(scores.size() == 2);
    // videos ordered by id, clips ordered by index
    CHECK(scores[0] == std::vector<double>{4.0, 4.0});
    CHECK(scores[1] == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(drift(scores) == doctest::Approx(0.5).epsilon(1e-12));

    std::ostringstream out;
    write_drift_csv(out, {"vid_a", "vid_b"}, {video_drift(scores[0]), video_drift(scores[1])});
    CHECK(out.str() == "video_id,drift\nvid_a,0\nvid_b,1\n");
}
