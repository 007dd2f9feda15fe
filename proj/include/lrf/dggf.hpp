// SPDX-License-Identifier: MIT
//
// Dynamic gated graph fusion. The fused sensor map is gated channel-wise by
// pooled text features (plus a conditional position term), a dynamic axial
// graph convolution aggregates masked differences along circularly rolled
// copies of the map, and a small feedforward with a residual produces the
// language-conditioned output.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lrf/tensor.hpp"

namespace lrf {

enum class GatePool { kMax, kAvg };
enum class GraphMode { kDynamic, kStatic };

struct DggfParams {
    Tensor gate_w;  // [C, Ct]: text width -> stage width
    Tensor gate_b;  // [C]
    Tensor cpe_w;   // [C,1,3,3] depthwise position term, zero-initialized
    Tensor fuse_w;  // [C,2C,1,1]: folds (X, X_final) back to C
    Tensor fuse_b;  // [C]
    Tensor w_in;    // [C,C] feedforward in
    Tensor w_out;   // [C,C] feedforward out
    int K = 8;      // axial roll step
    GatePool pool = GatePool::kMax;
    GraphMode mode = GraphMode::kDynamic;

    DggfParams() = default;
    DggfParams(int C, int Ct, int K, std::mt19937_64& rng);
    void params(std::vector<Tensor*>& out);
};

struct GraphStats {
    double mu = 0.0;
    double sigma = 0.0;       // population std
    std::int64_t pairs = 0;   // cell pairs touched by the estimator
    double threshold() const { return mu - sigma; }
};

struct RollMask {
    int dy = 0, dx = 0;
    std::vector<double> mask;  // H*W of exactly 0/1
};

// Pool the token axis of a [Ct, T] text feature to [Ct].
Tensor pooled_text(const Tensor& f_t, GatePool pool);

// Channel gate from pooled text, applied to lr plus its depthwise position
// term: out = sigmoid(W*pool(f_t)+b) ⊙ (lr + cpe(lr)).
Tensor text_gate(const Tensor& f_t, const Tensor& lr, const DggfParams& p);

// Quadrant statistics: for the two diagonal quadrant pairings, the
// channel-wise Euclidean distance between corresponding cells; mu/sigma over
// that sample. Odd extents are edge-replicated to even first. Values only —
// no gradient flows through the statistics.
GraphStats estimate_stats(const Tensor& X);

// Connectivity masks for every roll offset (step K down while m*K < H, then
// right while m*K < W): a cell connects iff its distance to the rolled copy
// is strictly below mu - sigma. Static mode connects everything.
std::vector<RollMask> dyn_masks(const Tensor& X, const GraphStats& stats, int K,
                                GraphMode mode);

// Accumulates mask ⊙ (rolled - X) with an elementwise max over rolls, then
// folds concat(X, X_final) with the 1x1 fuse conv.
Tensor dyn_conv(const Tensor& X, const GraphStats& stats, int K, const Tensor& fuse_w,
                const Tensor& fuse_b, GraphMode mode);

// Full block: lc = W_out · GeLU(W_in · dyn_conv(gate(f_t, lr))) + lr.
Tensor dggf_forward(const Tensor& f_t, const Tensor& lr, const DggfParams& p);

}  // namespace lrf
