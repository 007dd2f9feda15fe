// SPDX-License-Identifier: MIT

#include "lrf/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>

#include "lrf/baca.hpp"
#include "lrf/tensor.hpp"

namespace lrf {

namespace {

std::int64_t i64(int v) { return static_cast<std::int64_t>(v); }

void check_shape(int c, int h, int w) {
    if (c < 1 || h < 1 || w < 1) throw std::invalid_argument("non-positive shape");
}

}  // namespace

std::string CostReport::csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%d,%lld,%lld,%lld,%lld,%.6f,%.6f",
                  method.c_str(), c, h, w, agent_or_heads,
                  static_cast<long long>(macs_attention),
                  static_cast<long long>(macs_projections),
                  static_cast<long long>(macs_total), static_cast<long long>(params),
                  wall_ms, wall_iqr_ms);
    return buf;
}

CostReport count_baca(int c, int h, int w, int l) {
    check_shape(c, h, w);
    const std::int64_t L = i64(h) * i64(w);
    if (l < 1 || i64(l) > L) throw std::invalid_argument("agent count outside [1, H*W]");
    CostReport r;
    r.method = "baca";
    r.c = c;
    r.h = h;
    r.w = w;
    r.agent_or_heads = l;
    r.macs_projections = 6 * L * i64(c) * i64(c);
    r.macs_attention = 8 * i64(l) * L * i64(c) + 2 * L * i64(c);
    r.macs_total = r.macs_projections + r.macs_attention;
    r.params = 6 * i64(c) * i64(c);
    return r;
}

CostReport count_mhca(int c, int h, int w, int n_heads) {
    check_shape(c, h, w);
    if (n_heads < 1 || c % n_heads != 0)
        throw std::invalid_argument("channel count not divisible by head count");
    const std::int64_t L = i64(h) * i64(w);
    CostReport r;
    r.method = "mhca";
    r.c = c;
    r.h = h;
    r.w = w;
    r.agent_or_heads = n_heads;
    r.macs_projections = 8 * L * i64(c) * i64(c);
    r.macs_attention = 4 * L * L * i64(c);
    r.macs_total = r.macs_projections + r.macs_attention;
    r.params = 8 * i64(c) * i64(c);
    return r;
}

CostReport count_mhlca(int c, int h, int w, int n_heads) {
    check_shape(c, h, w);
    if (n_heads < 1 || c % n_heads != 0)
        throw std::invalid_argument("channel count not divisible by head count");
    const std::int64_t L = i64(h) * i64(w);
    CostReport r;
    r.method = "mhlca";
    r.c = c;
    r.h = h;
    r.w = w;
    r.agent_or_heads = n_heads;
    r.macs_projections = 8 * L * i64(c) * i64(c);
    r.macs_attention = 4 * L * i64(c) * i64(c);
    r.macs_total = r.macs_projections + r.macs_attention;
    r.params = 8 * i64(c) * i64(c);
    return r;
}

namespace {

// Value-only full cross attention, one direction; used by the benchmark.
Tensor mhca_direction(const Tensor& fq, const Tensor& fkv, const Tensor& wq,
                      const Tensor& wk, const Tensor& wv, const Tensor& wo) {
    const int c = fq.shape()[0];
    const int L = fq.shape()[1] * fq.shape()[2];
    Tensor q = matmul(wq, reshape(fq, {c, L}));
    Tensor k = matmul(wk, reshape(fkv, {c, L}));
    Tensor v = matmul(wv, reshape(fkv, {c, L}));
    Tensor attn = softmax_rows(mul_scalar(matmul(transpose(q), k), 1.0 / std::sqrt(c)));
    return matmul(wo, matmul(v, transpose(attn)));
}

// Kernelized (elu+1-free; softplus-free) linear attention: phi = sigmoid.
Tensor mhlca_direction(const Tensor& fq, const Tensor& fkv, const Tensor& wq,
                       const Tensor& wk, const Tensor& wv, const Tensor& wo) {
    const int c = fq.shape()[0];
    const int L = fq.shape()[1] * fq.shape()[2];
    Tensor q = sigmoid(matmul(wq, reshape(fq, {c, L})));
    Tensor k = sigmoid(matmul(wk, reshape(fkv, {c, L})));
    Tensor v = matmul(wv, reshape(fkv, {c, L}));
    Tensor kv = matmul(v, transpose(k));            // [C,C]
    return matmul(wo, matmul(kv, q));               // [C,L]
}

struct BenchClosure {
    std::function<void()> run;
};

BenchClosure make_closure(const std::string& method, int c, int h, int w, int agent_side,
                          std::mt19937_64& rng) {
    auto fl = Tensor::uniform({c, h, w}, -1.0, 1.0, rng);
    auto fr = Tensor::uniform({c, h, w}, -1.0, 1.0, rng);
    if (method == "baca") {
        BacaParams p(c, rng);
        p.agent_h = agent_side;
        p.agent_w = agent_side;
        return {[=]() { (void)baca_forward(fl, fr, p); }};
    }
    auto wq = Tensor::uniform({c, c}, -0.1, 0.1, rng);
    auto wk = Tensor::uniform({c, c}, -0.1, 0.1, rng);
    auto wv = Tensor::uniform({c, c}, -0.1, 0.1, rng);
    auto wo = Tensor::uniform({c, c}, -0.1, 0.1, rng);
    if (method == "mhca")
        return {[=]() {
            (void)mhca_direction(fl, fr, wq, wk, wv, wo);
            (void)mhca_direction(fr, fl, wq, wk, wv, wo);
        }};
    if (method == "mhlca")
        return {[=]() {
            (void)mhlca_direction(fl, fr, wq, wk, wv, wo);
            (void)mhlca_direction(fr, fl, wq, wk, wv, wo);
        }};
    throw std::invalid_argument("unknown bench method: " + method);
}

}  // namespace

CostReport bench_wallclock(const std::string& method, int c, int h, int w, int agent_side,
                           int repeats) {
    CostReport r;
    if (method == "baca")
        r = count_baca(c, h, w, agent_side * agent_side);
    else if (method == "mhca")
        r = count_mhca(c, h, w, agent_side);
    else if (method == "mhlca")
        r = count_mhlca(c, h, w, agent_side);
    else
        throw std::invalid_argument("unknown bench method: " + method);

    std::mt19937_64 rng(0x5eedULL);
    BenchClosure cl = make_closure(method, c, h, w, agent_side, rng);

    repeats = std::max(repeats, 20);
    // Single-worker by construction; repeats double until the median clears
    // timer resolution.
    for (int attempt = 0; attempt < 4; ++attempt) {
        cl.run();  // warm-up, excluded
        cl.run();
        std::vector<double> ms;
        ms.reserve(repeats);
        for (int i = 0; i < repeats; ++i) {
            auto t0 = std::chrono::steady_clock::now();
            cl.run();
            auto t1 = std::chrono::steady_clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(ms.begin(), ms.end());
        const double median = ms[ms.size() / 2];
        if (median < 0.05 && attempt < 3) {
            repeats *= 2;
            continue;
        }
        r.wall_ms = median;
        r.wall_iqr_ms = ms[(ms.size() * 3) / 4] - ms[ms.size() / 4];
        break;
    }
    return r;
}

std::string format_cost_table(const std::vector<CostReport>& rows) {
    std::string out =
        "method   C    H    W  agent/heads      MACs(attn)      MACs(proj)     "
        " MACs(total)    params   wall_ms\n";
    for (const CostReport& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-7s %3d %4d %4d %12d %15lld %15lld %15lld %9lld %9.3f\n",
                      r.method.c_str(), r.c, r.h, r.w, r.agent_or_heads,
                      static_cast<long long>(r.macs_attention),
                      static_cast<long long>(r.macs_projections),
                      static_cast<long long>(r.macs_total), static_cast<long long>(r.params),
                      r.wall_ms);
        out += buf;
    }
    return out;
}

}  // namespace lrf
