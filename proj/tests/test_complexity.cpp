// SPDX-License-Identifier: MIT
//
// Cost-model tests: scaling laws of the closed forms (affine/quadratic in
// the token count), independence properties, hand-checked reference values
// at the benchmark shape, and wall-clock sanity on small shapes.

#include <cstdint>
#include <string>

#include "lrf/complexity.hpp"
#include "testing.hpp"

using namespace lrf;

namespace {

void test_reference_values() {
    // Hand-computed at (C=64, H=W=80, l=64): L = 6400.
    CostReport b = count_baca(64, 80, 80, 64);
    REQUIRE(b.macs_projections == 6LL * 6400 * 64 * 64, "baca projection count");
    REQUIRE(b.macs_attention == 8LL * 64 * 6400 * 64 + 2LL * 6400 * 64,
            "baca attention count");
    REQUIRE(b.macs_total == 367820800LL, "baca total at the benchmark shape");
    REQUIRE(b.params == 6 * 64 * 64, "six CxC projections");

    CostReport m = count_mhca(64, 80, 80, 8);
    REQUIRE(m.macs_total == 10695475200LL, "full cross-attention total");
    REQUIRE(m.params == 8 * 64 * 64, "eight CxC maps");

    // The agent variant undercuts the full one by a wide margin, though the
    // margin depends on whether projections are included.
    const double ratio_total = (double)m.macs_total / (double)b.macs_total;
    const double ratio_attn = (double)m.macs_attention / (double)b.macs_attention;
    REQUIRE_NEAR(ratio_total, 29.0779, 1e-3, "total-count ratio at benchmark shape");
    REQUIRE_NEAR(ratio_attn, 49.8047, 1e-3, "attention-count ratio at benchmark shape");
}

void test_scaling_laws() {
    // Affine in L at fixed (C,l): equal L spacing gives a zero second
    // difference, exactly, in integer arithmetic.
    const std::int64_t c1 = count_baca(32, 8, 8, 16).macs_total;   // L=64
    const std::int64_t c2 = count_baca(32, 8, 16, 16).macs_total;  // L=128
    const std::int64_t c3 = count_baca(32, 8, 24, 16).macs_total;  // L=192
    REQUIRE((c3 - c2) == (c2 - c1), "baca total affine in token count");
    const std::int64_t a1 = count_mhlca(32, 8, 8, 4).macs_total;
    const std::int64_t a2 = count_mhlca(32, 8, 16, 4).macs_total;
    const std::int64_t a3 = count_mhlca(32, 8, 24, 4).macs_total;
    REQUIRE((a3 - a2) == (a2 - a1), "linear variant affine in token count");

    // Full attention is quadratic: doubling H and W scales the attention
    // term by exactly 16.
    REQUIRE(count_mhca(32, 16, 16, 4).macs_attention ==
                16 * count_mhca(32, 8, 8, 4).macs_attention,
            "quadratic token scaling");

    // Agent-count growth: l=256 vs l=64 on the attention term lands just
    // under 4 (the L-only pooling term dilutes the pure 4x).
    const double growth = (double)count_baca(64, 80, 80, 256).macs_attention /
                          (double)count_baca(64, 80, 80, 64).macs_attention;
    REQUIRE(growth > 3.0 && growth < 4.2, "agent growth factor near 4");
    REQUIRE_NEAR(growth, 3.98832, 1e-4, "agent growth value");
}

void test_independence() {
    // Monotone in l; the baselines do not see l at all.
    REQUIRE(count_baca(32, 16, 16, 8).macs_total < count_baca(32, 16, 16, 16).macs_total &&
                count_baca(32, 16, 16, 16).macs_total < count_baca(32, 16, 16, 32).macs_total,
            "baca count monotone in agent count");
    REQUIRE(count_mhca(32, 16, 16, 2).macs_total == count_mhca(32, 16, 16, 8).macs_total,
            "head count leaves MAC count unchanged");

    // Parameter counts ignore H, W.
    REQUIRE(count_baca(32, 8, 8, 4).params == count_baca(32, 64, 64, 4).params,
            "baca params shape-free");
    REQUIRE(count_mhca(32, 8, 8, 4).params == count_mhca(32, 64, 64, 4).params,
            "mhca params shape-free");
    REQUIRE(count_mhlca(32, 8, 8, 4).params == count_mhlca(32, 64, 64, 4).params,
            "mhlca params shape-free");

    REQUIRE_THROWS(count_baca(32, 8, 8, 65), "agent count above H*W rejected");
    REQUIRE_THROWS(count_baca(32, 8, 8, 0), "zero agents rejected");
    REQUIRE_THROWS(count_mhca(30, 8, 8, 4), "indivisible head count rejected");
}

void test_wallclock() {
    CostReport b = bench_wallclock("baca", 32, 24, 24, 4, 21);
    CostReport m = bench_wallclock("mhca", 32, 24, 24, 4, 21);
    REQUIRE(b.wall_ms > 0.0 && m.wall_ms > 0.0, "both methods measured");
    REQUIRE(b.wall_iqr_ms >= 0.0 && m.wall_iqr_ms >= 0.0, "spread reported");
    REQUIRE(b.wall_ms < m.wall_ms, "agent attention faster than full attention");
    // Medians must be reproducible enough to support that comparison, even
    // on a loaded machine; IQR magnitude itself is environment noise.
    CostReport b2 = bench_wallclock("baca", 32, 24, 24, 4, 21);
    REQUIRE(b2.wall_ms < 3.0 * b.wall_ms && b.wall_ms < 3.0 * b2.wall_ms,
            "median reproducible within 3x");
    REQUIRE(b2.wall_ms < m.wall_ms, "method ordering stable across calls");

    // Counts are analytic: identical across repeated calls.
    CostReport again = bench_wallclock("baca", 32, 24, 24, 4, 21);
    REQUIRE(again.macs_total == b.macs_total && again.params == b.params,
            "analytic counts deterministic");

    std::string csv = b.csv_row();
    REQUIRE(csv.find("baca,32,24,24,16,") == 0, "csv row starts with identity fields");
    REQUIRE(!format_cost_table({b, m}).empty(), "table renders");
    REQUIRE_THROWS(bench_wallclock("nope", 8, 8, 8, 2, 20), "unknown method rejected");
}

}  // namespace

int main() {
    RUN(test_reference_values);
    RUN(test_scaling_laws);
    RUN(test_independence);
    RUN(test_wallclock);
    return finish("test_complexity");
}
