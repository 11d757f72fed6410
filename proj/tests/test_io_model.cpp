#include <doctest.h>

#include "hexfuse/io_model.hpp"

using namespace hexfuse;

TEST_CASE("per-stage word counts, d=3") {
    const DataIO s23 = io_model(3, {Stage::S2, Stage::S3});
    CHECK(s23.reads == 52);
    CHECK(s23.writes == 52);
    CHECK(s23.total() == 104);
    const DataIO f23 = io_model(3, {Stage::Fused23});
    CHECK(f23.total() == 26);
    CHECK(speedup_estimate(s23, f23) == doctest::Approx(4.0));

    const DataIO s236 = io_model(3, {Stage::S2, Stage::S3, Stage::S6});
    CHECK(s236.total() == 139);  // 104 + (13 + 9 + 13)
    const DataIO f236 = io_model(3, {Stage::Fused236});
    CHECK(f236.total() == 26);
    CHECK(speedup_estimate(s236, f236) == doctest::Approx(5.3462).epsilon(1e-4));
}

TEST_CASE("d=2 cancellation gives 1+d") {
    // The stage model reads n_v and writes d*n_v in stage 2 and mirrors that
    // in stage 3, so the fused ratio is exactly 1+d in any dimension.
    const DataIO s23 = io_model(2, {Stage::S2, Stage::S3});
    const DataIO f23 = io_model(2, {Stage::Fused23});
    CHECK(s23.total() == 42);
    CHECK(f23.total() == 14);
    CHECK(s23.total() == 3 * f23.total());  // exact integer arithmetic
    CHECK(speedup_estimate(s23, f23) == doctest::Approx(3.0));
}

TEST_CASE("speedup estimate edge cases") {
    CHECK(speedup_estimate({104, 0}, {26, 0}) == doctest::Approx(4.0));
    CHECK(speedup_estimate({10, 10}, {10, 10}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(speedup_estimate({10, 10}, {0, 0}), std::invalid_argument);
}

TEST_CASE("full-element shared sizing") {
    CHECK(shared_bytes_full_element(64, 4, 4, 3, Precision::fp32) == 53248);
    CHECK(shared_bytes_full_element(64, 4, 4, 3, Precision::fp64) == 106496);
    // one element per block: n_v * m^d words
    CHECK(shared_bytes_full_element(16, 2, 16, 3, Precision::fp32) == 13 * 8 * 4);
    CHECK_THROWS_AS(shared_bytes_full_element(64, 4, 5, 3, Precision::fp32), std::invalid_argument);
}

TEST_CASE("unknown stage set rejected by construction") {
    CHECK_THROWS_AS(io_model(4, {Stage::S2}), std::invalid_argument);
}
