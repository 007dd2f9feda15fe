// SPDX-License-Identifier: MIT

#include "lrf/baca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lrf {

BacaParams::BacaParams(int C, std::mt19937_64& rng, BacaMerge merge_) : merge(merge_) {
    wql = Tensor::param({C, C}, C, rng);
    wkl = Tensor::param({C, C}, C, rng);
    wvl = Tensor::param({C, C}, C, rng);
    wqr = Tensor::param({C, C}, C, rng);
    wkr = Tensor::param({C, C}, C, rng);
    wvr = Tensor::param({C, C}, C, rng);
    if (merge == BacaMerge::kConcat) merge_w = Tensor::param({C, 2 * C}, 2 * C, rng);
}

void BacaParams::params(std::vector<Tensor*>& out) {
    for (Tensor* t : {&wql, &wkl, &wvl, &wqr, &wkr, &wvr}) out.push_back(t);
    if (merge_w.defined()) out.push_back(&merge_w);
}

Tensor sinusoidal_pe(int C, int H, int W) {
    if (C < 2 || C % 2 != 0)
        throw std::invalid_argument("sinusoidal_pe: channel count must be even, got " +
                                    std::to_string(C));
    const int half = C / 2;
    std::vector<double> v((size_t)C * H * W);
    for (int c = 0; c < C; ++c) {
        const bool is_row = c >= half;  // second half encodes the row index
        const int i = is_row ? c - half : c;
        const double div = std::pow(10000.0, (double)(2 * (i / 2)) / half);
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const double pos = is_row ? h : w;
                const double ang = pos / div;
                v[((size_t)c * H + h) * W + w] = (i % 2 == 0) ? std::sin(ang) : std::cos(ang);
            }
    }
    return Tensor::from_data({C, H, W}, std::move(v));
}

int agent_extent(int want, int map_extent) {
    return std::min(want, std::max(1, map_extent / 2));
}

namespace {

void check_square(const Tensor& w, int C, const char* name) {
    if (w.rank() != 2 || w.dim(0) != C || w.dim(1) != C)
        throw std::invalid_argument(std::string("make_qkv: ") + name + " must be [" +
                                    std::to_string(C) + "," + std::to_string(C) + "], got " +
                                    shape_str(w.shape()));
}

}  // namespace

AgentTriple make_qkv(const Tensor& fmap, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                     int agent_h, int agent_w, bool use_pe) {
    if (fmap.rank() != 3)
        throw std::invalid_argument("make_qkv: feature map must be [C,H,W], got " +
                                    shape_str(fmap.shape()));
    const int C = fmap.dim(0), H = fmap.dim(1), W = fmap.dim(2);
    check_square(wq, C, "W_Q");
    check_square(wk, C, "W_K");
    check_square(wv, C, "W_V");
    if (agent_h <= 0 || agent_w <= 0)
        throw std::invalid_argument("make_qkv: agent pool size must be positive");

    Tensor x = use_pe ? add(fmap, sinusoidal_pe(C, H, W)) : fmap;
    Tensor none;
    AgentTriple t;
    t.q = linear(x, wq, none);
    t.k = reshape(linear(x, wk, none), {C, H * W});
    t.v = reshape(linear(x, wv, none), {C, H * W});
    const int he = agent_extent(agent_h, H), we = agent_extent(agent_w, W);
    t.a = reshape(adaptive_avg_pool(t.q, he, we), {C, he * we});
    return t;
}

Tensor agent_attend(const Tensor& q, const Tensor& a_self, const Tensor& k_other,
                    const Tensor& v_other) {
    if (q.rank() != 3)
        throw std::invalid_argument("agent_attend: query must be [C,H,W], got " +
                                    shape_str(q.shape()));
    const int C = q.dim(0), H = q.dim(1), W = q.dim(2);
    if (a_self.rank() != 2 || a_self.dim(0) != C)
        throw std::invalid_argument("agent_attend: agents must be [C,l], got " +
                                    shape_str(a_self.shape()));
    if (k_other.rank() != 2 || v_other.rank() != 2 || k_other.dim(0) != C ||
        v_other.dim(0) != C || k_other.dim(1) != v_other.dim(1))
        throw std::invalid_argument("agent_attend: keys/values must be [C,L] with equal L");

    const double scale = 1.0 / std::sqrt((double)C);
    // Hop 1: agents (rows) gather from the other sensor's tokens.
    Tensor logits1 = mul_scalar(matmul(transpose(a_self), k_other), scale);  // [l,L]
    Tensor hop1 = matmul(softmax_rows(logits1), transpose(v_other));         // [l,C]
    // Hop 2: spatial tokens (rows) gather from the agents.
    Tensor qf = reshape(q, {C, H * W});
    Tensor logits2 = mul_scalar(matmul(transpose(qf), a_self), scale);  // [L,l]
    Tensor out = matmul(softmax_rows(logits2), hop1);                   // [L,C]
    return reshape(transpose(out), {C, H, W});
}

Tensor baca_forward(const Tensor& f_l, const Tensor& f_r, const BacaParams& p) {
    if (f_l.shape() != f_r.shape())
        throw std::invalid_argument("baca_forward: sensor maps differ, " +
                                    shape_str(f_l.shape()) + " vs " + shape_str(f_r.shape()));
    AgentTriple tl = make_qkv(f_l, p.wql, p.wkl, p.wvl, p.agent_h, p.agent_w, p.use_pe);
    AgentTriple tr = make_qkv(f_r, p.wqr, p.wkr, p.wvr, p.agent_h, p.agent_w, p.use_pe);
    Tensor f_lg = agent_attend(tl.q, tl.a, tr.k, tr.v);
    Tensor f_rm = agent_attend(tr.q, tr.a, tl.k, tl.v);
    if (p.merge == BacaMerge::kSum) return add(f_lg, f_rm);
    if (!p.merge_w.defined())
        throw std::invalid_argument("baca_forward: concat merge needs merge_w");
    Tensor none;
    return linear(concat_channels({f_lg, f_rm}), p.merge_w, none);
}

}  // namespace lrf
