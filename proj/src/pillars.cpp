// SPDX-License-Identifier: MIT

#include "lrf/pillars.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace lrf {

GridSpec GridSpec::full() { return GridSpec{}; }

GridSpec GridSpec::reduced() {
    GridSpec g;
    g.cell = 0.64;
    g.bev_channels = 8;
    g.stage_channels = {16, 32, 64};
    return g;
}

int GridSpec::raw_h() const {
    return static_cast<int>(std::lround((y_max - y_min) / cell));
}

int GridSpec::raw_w() const {
    return static_cast<int>(std::lround((x_max - x_min) / cell));
}

PillarSet pillarize(const PointCloud& cloud, const GridSpec& grid, std::uint64_t seed) {
    const int dim = cloud.point_dim();
    if (!cloud.data.empty() && cloud.data.size() % dim != 0)
        throw std::invalid_argument("pillarize: point buffer length " +
                                    std::to_string(cloud.data.size()) +
                                    " is not a multiple of the point width " +
                                    std::to_string(dim));
    const int W = grid.raw_w();
    const int cap = grid.max_points(cloud.kind);

    // Bucket in-range points per cell, keyed by flat index for a canonical
    // pillar order.
    std::map<int, std::vector<std::array<double, 5>>> buckets;
    for (int i = 0; i < cloud.size(); ++i) {
        const double* p = cloud.point(i);
        if (!grid.contains(p[0], p[1])) continue;
        const int col = static_cast<int>((p[0] - grid.x_min) / grid.cell);
        const int row = static_cast<int>((p[1] - grid.y_min) / grid.cell);
        std::array<double, 5> pt{};
        for (int k = 0; k < dim; ++k) pt[(size_t)k] = p[k];
        buckets[row * W + col].push_back(pt);
    }

    PillarSet set;
    set.feat_dim = dim + 3;
    for (auto& [cell, pts] : buckets) {
        // Canonical sort makes the result independent of input point order;
        // the random subsample below then depends only on (seed, cell).
        std::sort(pts.begin(), pts.end(), [dim](const auto& a, const auto& b) {
            for (int k = 0; k < 3; ++k)
                if (a[(size_t)k] != b[(size_t)k]) return a[(size_t)k] < b[(size_t)k];
            return a[3] < b[3];
        });
        if (static_cast<int>(pts.size()) > cap) {
            std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (std::uint64_t)(cell + 1)));
            std::shuffle(pts.begin(), pts.end(), rng);
            pts.resize((size_t)cap);
        }

        Pillar pillar;
        pillar.row = cell / W;
        pillar.col = cell % W;
        pillar.count = static_cast<int>(pts.size());
        double cx = 0.0, cy = 0.0, cz = 0.0;
        for (const auto& p : pts) {
            cx += p[0];
            cy += p[1];
            cz += p[2];
        }
        cx /= pillar.count;
        cy /= pillar.count;
        cz /= pillar.count;
        pillar.feats.reserve((size_t)pillar.count * set.feat_dim);
        for (const auto& p : pts) {
            for (int k = 0; k < dim; ++k) pillar.feats.push_back(p[(size_t)k]);
            pillar.feats.push_back(p[0] - cx);
            pillar.feats.push_back(p[1] - cy);
            pillar.feats.push_back(p[2] - cz);
        }
        set.pillars.push_back(std::move(pillar));
    }
    return set;
}

EncodedPillars encode_pillars(const PillarSet& set, const GridSpec& grid, const Tensor& W,
                              const Tensor& b) {
    EncodedPillars enc;
    const int c0 = W.dim(0);
    if (W.dim(1) != set.feat_dim)
        throw std::invalid_argument("encode_pillars: weight expects feat_dim " +
                                    std::to_string(W.dim(1)) + ", set has " +
                                    std::to_string(set.feat_dim));
    if (set.pillars.empty()) return enc;

    std::vector<Tensor> columns;
    columns.reserve(set.pillars.size());
    enc.cells.reserve(set.pillars.size());
    for (const Pillar& p : set.pillars) {
        // Points-as-columns [D, n] so the shared map broadcasts, then a max
        // over the point axis reduces the pillar to one vector.
        std::vector<double> buf((size_t)set.feat_dim * p.count);
        for (int i = 0; i < p.count; ++i)
            for (int k = 0; k < set.feat_dim; ++k)
                buf[(size_t)k * p.count + i] = p.feats[(size_t)i * set.feat_dim + k];
        Tensor pts = Tensor::from_data({set.feat_dim, p.count}, std::move(buf));
        Tensor reduced = max_over_cols(linear(pts, W, b));  // [C0]
        columns.push_back(reshape(reduced, {1, c0, 1}));
        enc.cells.push_back(p.row * grid.raw_w() + p.col);
    }
    // Stack [1,C0,1] blocks into [N,C0] then transpose to [C0,N].
    Tensor stacked = reshape(concat_channels(columns), {(int)columns.size(), c0});
    enc.feats = transpose(stacked);
    return enc;
}

Tensor scatter_bev(const EncodedPillars& enc, const GridSpec& grid) {
    const int H = grid.raw_h(), W = grid.raw_w();
    if (!enc.feats.defined()) return Tensor::zeros({grid.bev_channels, H, W});
    return scatter_cells(enc.feats, enc.cells, H, W);
}

ConvUnit::ConvUnit(int cin, int cout, int stride_, std::mt19937_64& rng) : stride(stride_) {
    w = Tensor::param({cout, cin, 3, 3}, cin * 9, rng);
    b = Tensor::zeros({cout}, true);
    gamma = Tensor::full({cout}, 1.0, true);
    beta = Tensor::zeros({cout}, true);
}

Tensor ConvUnit::forward(const Tensor& x) const {
    return gelu(instance_norm(conv2d(x, w, b, stride, 1), gamma, beta));
}

void ConvUnit::params(std::vector<Tensor*>& out) {
    out.push_back(&w);
    out.push_back(&b);
    out.push_back(&gamma);
    out.push_back(&beta);
}

Backbone::Backbone(const GridSpec& grid, std::mt19937_64& rng) {
    const int c0 = grid.bev_channels;
    const auto& sc = grid.stage_channels;
    units_[0] = ConvUnit(c0, sc[0], 2, rng);
    units_[1] = ConvUnit(sc[0], sc[0], 1, rng);
    units_[2] = ConvUnit(sc[0], sc[1], 2, rng);
    units_[3] = ConvUnit(sc[1], sc[1], 1, rng);
    units_[4] = ConvUnit(sc[1], sc[2], 2, rng);
    units_[5] = ConvUnit(sc[2], sc[2], 1, rng);
}

std::array<Tensor, 3> Backbone::forward(const Tensor& bev) const {
    Tensor s3 = units_[1].forward(units_[0].forward(bev));
    Tensor s4 = units_[3].forward(units_[2].forward(s3));
    Tensor s5 = units_[5].forward(units_[4].forward(s4));
    return {s3, s4, s5};
}

void Backbone::params(std::vector<Tensor*>& out) {
    for (ConvUnit& u : units_) u.params(out);
}

Fpn::Fpn(const GridSpec& grid, std::mt19937_64& rng) {
    const auto& sc = grid.stage_channels;
    out_channels_ = 2 * sc[0];
    p4_w_ = Tensor::param({sc[0], sc[1], 1, 1}, sc[1], rng);
    p4_b_ = Tensor::zeros({sc[0]}, true);
    p5_w_ = Tensor::param({sc[0], sc[2], 1, 1}, sc[2], rng);
    p5_b_ = Tensor::zeros({sc[0]}, true);
    fuse_w_ = Tensor::param({out_channels_, 3 * sc[0], 1, 1}, 3 * sc[0], rng);
    fuse_b_ = Tensor::zeros({out_channels_}, true);
}

Tensor Fpn::forward(const std::array<Tensor, 3>& stages) const {
    // 1x1 projection commutes with nearest upsampling; projecting first keeps
    // the arithmetic at the lower resolution.
    Tensor u4 = upsample_nearest(conv2d(stages[1], p4_w_, p4_b_), 2);
    Tensor u5 = upsample_nearest(conv2d(stages[2], p5_w_, p5_b_), 4);
    Tensor cat = concat_channels({stages[0], u4, u5});
    return conv2d(cat, fuse_w_, fuse_b_);
}

void Fpn::params(std::vector<Tensor*>& out) {
    for (Tensor* t : {&p4_w_, &p4_b_, &p5_w_, &p5_b_, &fuse_w_, &fuse_b_}) out.push_back(t);
}

}  // namespace lrf
