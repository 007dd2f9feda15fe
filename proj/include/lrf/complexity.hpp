// SPDX-License-Identifier: MIT
//
// Analytic cost counters and wall-clock microbenchmarks for the fusion
// attention variants. Counts are exact closed forms in multiply-accumulate
// units (one MAC = one multiply + one add); both attention directions are
// always included because the fusion block runs both.
//
//   agent cross attention (L = H*W tokens per sensor, l agent tokens):
//     projections: 6 L C^2            (Q,K,V per direction, C x C maps)
//     attention:   8 l L C + 2 L C    (two hops each way + agent pooling)
//     params:      6 C^2
//   full cross attention (N_h heads; head count leaves MACs unchanged):
//     projections: 8 L C^2            (Q,K,V,out per direction)
//     attention:   4 L^2 C            (logits + weighted sum, both ways)
//     params:      8 C^2
//   kernelized linear cross attention:
//     projections: 8 L C^2
//     attention:   4 L C^2            (K^T V and Q (K^T V), both ways)
//     params:      8 C^2

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lrf {

struct CostReport {
    std::string method;
    int c = 0, h = 0, w = 0;
    int agent_or_heads = 0;  // agent token count, or head count for baselines
    std::int64_t macs_attention = 0;
    std::int64_t macs_projections = 0;
    std::int64_t macs_total = 0;
    std::int64_t params = 0;
    double wall_ms = -1.0;      // median per forward; < 0 when not measured
    double wall_iqr_ms = 0.0;   // interquartile range of the same runs

    std::string csv_row() const;
};

inline constexpr const char* kCostCsvHeader =
    "method,c,h,w,agent_or_heads,macs_attention,macs_projections,macs_total,"
    "params,wall_ms,wall_iqr_ms";

CostReport count_baca(int c, int h, int w, int l);       // pre: 1 <= l <= H*W
CostReport count_mhca(int c, int h, int w, int n_heads);  // pre: C % N_h == 0
CostReport count_mhlca(int c, int h, int w, int n_heads);

// Runs the named method ("baca" with agent side sqrt-ish, "mhca", "mhlca")
// in-process and fills wall_ms/wall_iqr_ms on top of the analytic counts.
// `agent_side` is the agent grid side for baca and the head count otherwise.
// Repeats below 20 are raised to 20; if the median lands under 50 us the
// repeat count doubles (up to 8x) to get above timer resolution.
CostReport bench_wallclock(const std::string& method, int c, int h, int w,
                           int agent_side, int repeats = 20);

std::string format_cost_table(const std::vector<CostReport>& rows);

}  // namespace lrf
