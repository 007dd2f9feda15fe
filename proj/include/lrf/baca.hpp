// SPDX-License-Identifier: MIT
//
// Bidirectional agent cross attention. Each sensor map is projected to a
// query/key/value triple (queries keep their spatial layout, keys/values are
// flattened); a small agent token set pooled from the queries mediates a
// two-hop softmax attention against the other sensor's keys/values, once in
// each direction, and the two directional outputs are merged.

#pragma once

#include <random>
#include <vector>

#include "lrf/tensor.hpp"

namespace lrf {

enum class BacaMerge { kSum, kConcat };

struct BacaParams {
    Tensor wql, wkl, wvl;  // first-sensor projections, each [C,C]
    Tensor wqr, wkr, wvr;  // second-sensor projections
    int agent_h = 12, agent_w = 12;
    bool use_pe = true;
    BacaMerge merge = BacaMerge::kSum;
    Tensor merge_w;  // [C, 2C], used only by the concat merge

    BacaParams() = default;
    BacaParams(int C, std::mt19937_64& rng, BacaMerge merge = BacaMerge::kSum);
    void params(std::vector<Tensor*>& out);
};

struct AgentTriple {
    Tensor q;  // [C,H,W]
    Tensor k;  // [C,L], L = H*W flattened row-major
    Tensor v;  // [C,L]
    Tensor a;  // [C,l], agents pooled from q
};

// Fixed 2-D sinusoidal position encoding: the first C/2 channels encode the
// column index, the rest the row index, sin/cos interleaved per frequency.
// C must be even.
Tensor sinusoidal_pe(int C, int H, int W);

// Pool extent used for the agent grid: at most `want` per axis, at least 1,
// never more than half the map extent.
int agent_extent(int want, int map_extent);

AgentTriple make_qkv(const Tensor& fmap, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                     int agent_h, int agent_w, bool use_pe);

// Two-hop attention: agents gather from the other sensor's keys/values, the
// query map then gathers from the agents. Both hops scale logits by
// 1/sqrt(C) and normalize row-wise over the key axis.
Tensor agent_attend(const Tensor& q, const Tensor& a_self, const Tensor& k_other,
                    const Tensor& v_other);

// Runs both directions and merges (sum by default; concat + 1x1 map when
// params.merge selects it).
Tensor baca_forward(const Tensor& f_l, const Tensor& f_r, const BacaParams& p);

}  // namespace lrf
