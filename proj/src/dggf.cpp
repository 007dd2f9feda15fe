// SPDX-License-Identifier: MIT

#include "lrf/dggf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lrf {

DggfParams::DggfParams(int C, int Ct, int K_, std::mt19937_64& rng) : K(K_) {
    gate_w = Tensor::param({C, Ct}, Ct, rng);
    gate_b = Tensor::zeros({C}, true);
    cpe_w = Tensor::zeros({C, 1, 3, 3}, true);
    fuse_w = Tensor::param({C, 2 * C, 1, 1}, 2 * C, rng);
    fuse_b = Tensor::zeros({C}, true);
    w_in = Tensor::param({C, C}, C, rng);
    w_out = Tensor::param({C, C}, C, rng);
}

void DggfParams::params(std::vector<Tensor*>& out) {
    for (Tensor* t : {&gate_w, &gate_b, &cpe_w, &fuse_w, &fuse_b, &w_in, &w_out})
        out.push_back(t);
}

Tensor pooled_text(const Tensor& f_t, GatePool pool) {
    if (f_t.rank() != 2)
        throw std::invalid_argument("pooled_text: text features must be [Ct,T], got " +
                                    shape_str(f_t.shape()));
    return pool == GatePool::kMax ? max_over_cols(f_t) : mean_over_cols(f_t);
}

Tensor text_gate(const Tensor& f_t, const Tensor& lr, const DggfParams& p) {
    if (lr.rank() != 3)
        throw std::invalid_argument("text_gate: lr must be [C,H,W], got " +
                                    shape_str(lr.shape()));
    const int C = lr.dim(0);
    if (p.gate_w.dim(0) != C || p.gate_w.dim(1) != f_t.dim(0))
        throw std::invalid_argument("text_gate: gate map is " + shape_str(p.gate_w.shape()) +
                                    ", needs [" + std::to_string(C) + "," +
                                    std::to_string(f_t.dim(0)) + "]");
    Tensor none;
    Tensor wg = sigmoid(linear(pooled_text(f_t, p.pool), p.gate_w, p.gate_b));  // [C]
    Tensor cpe = conv2d(lr, p.cpe_w, none, 1, 1, C);  // depthwise 3x3
    return scale_channels(add(lr, cpe), wg);
}

GraphStats estimate_stats(const Tensor& X) {
    if (X.rank() != 3)
        throw std::invalid_argument("estimate_stats: expected [C,H,W], got " +
                                    shape_str(X.shape()));
    const int C = X.dim(0), H = X.dim(1), W = X.dim(2);
    const std::vector<double>& v = X.value();
    // Edge replication makes odd extents even before the quadrant split.
    auto at = [&](int c, int r, int col) {
        r = std::min(r, H - 1);
        col = std::min(col, W - 1);
        return v[((size_t)c * H + r) * W + col];
    };
    const int hh = (H + (H & 1)) / 2, ww = (W + (W & 1)) / 2;
    auto pair_dist = [&](int r0, int c0, int r1, int c1) {
        double acc = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = at(c, r0, c0) - at(c, r1, c1);
            acc += d * d;
        }
        return std::sqrt(acc);
    };
    std::vector<double> dists;
    dists.reserve((size_t)hh * ww * 2);
    for (int r = 0; r < hh; ++r)
        for (int col = 0; col < ww; ++col) {
            dists.push_back(pair_dist(r, col, r + hh, col + ww));           // TL - BR
            dists.push_back(pair_dist(r, col + ww, r + hh, col));           // TR - BL
        }
    GraphStats s;
    s.pairs = (std::int64_t)dists.size();
    for (double d : dists) s.mu += d;
    s.mu /= (double)dists.size();
    double var = 0.0;
    for (double d : dists) var += (d - s.mu) * (d - s.mu);
    s.sigma = std::sqrt(var / (double)dists.size());
    return s;
}

std::vector<RollMask> dyn_masks(const Tensor& X, const GraphStats& stats, int K,
                                GraphMode mode) {
    if (X.rank() != 3)
        throw std::invalid_argument("dyn_masks: expected [C,H,W], got " +
                                    shape_str(X.shape()));
    const int C = X.dim(0), H = X.dim(1), W = X.dim(2);
    if (K < 1 || K >= std::min(H, W))
        throw std::invalid_argument("dyn_masks: step " + std::to_string(K) +
                                    " must satisfy 1 <= K < min(H,W) = " +
                                    std::to_string(std::min(H, W)));
    const std::vector<double>& v = X.value();
    const double thresh = stats.threshold();

    std::vector<RollMask> out;
    for (int m = 1; m * K < H; ++m) out.push_back({m * K, 0, {}});
    for (int m = 1; m * K < W; ++m) out.push_back({0, m * K, {}});
    for (RollMask& rm : out) {
        rm.mask.assign((size_t)H * W, 0.0);
        for (int r = 0; r < H; ++r)
            for (int col = 0; col < W; ++col) {
                if (mode == GraphMode::kStatic) {
                    rm.mask[(size_t)r * W + col] = 1.0;
                    continue;
                }
                const int rr = (r - rm.dy + H) % H;
                const int rc = (col - rm.dx + W) % W;
                double acc = 0.0;
                for (int c = 0; c < C; ++c) {
                    const double d = v[((size_t)c * H + r) * W + col] -
                                     v[((size_t)c * H + rr) * W + rc];
                    acc += d * d;
                }
                if (std::sqrt(acc) < thresh) rm.mask[(size_t)r * W + col] = 1.0;
            }
    }
    return out;
}

Tensor dyn_conv(const Tensor& X, const GraphStats& stats, int K, const Tensor& fuse_w,
                const Tensor& fuse_b, GraphMode mode) {
    const int C = X.dim(0), H = X.dim(1), W = X.dim(2);
    std::vector<RollMask> masks = dyn_masks(X, stats, K, mode);
    Tensor xfinal = Tensor::zeros({C, H, W});
    for (const RollMask& rm : masks) {
        // Broadcast the 0/1 cell mask over channels; it is a constant, so no
        // gradient flows through the connectivity decision.
        std::vector<double> tiled((size_t)C * H * W);
        for (int c = 0; c < C; ++c)
            std::copy(rm.mask.begin(), rm.mask.end(), tiled.begin() + (size_t)c * H * W);
        Tensor mask = Tensor::from_data({C, H, W}, std::move(tiled));
        Tensor masked = mul(mask, sub(roll2d(X, rm.dy, rm.dx), X));
        xfinal = emax(masked, xfinal);
    }
    return conv2d(concat_channels({X, xfinal}), fuse_w, fuse_b);
}

Tensor dggf_forward(const Tensor& f_t, const Tensor& lr, const DggfParams& p) {
    Tensor gated = text_gate(f_t, lr, p);
    GraphStats s = estimate_stats(gated);
    Tensor g = dyn_conv(gated, s, p.K, p.fuse_w, p.fuse_b, p.mode);
    Tensor none;
    Tensor h = linear(gelu(linear(g, p.w_in, none)), p.w_out, none);
    return add(h, lr);
}

}  // namespace lrf
