// SPDX-License-Identifier: MIT
//
// BEV pillar encoding and the strided convolutional backbone + FPN.
//
// Each sensor's point cloud is binned into vertical pillars on a raw BEV
// grid; per-point features (raw fields plus offsets from the pillar
// centroid) pass through a shared linear map and a per-pillar max, are
// scattered onto the grid, and feed a three-stage backbone whose outputs
// are fused by a small FPN back at stage-3 resolution.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lrf/tensor.hpp"

namespace lrf {

enum class SensorKind { kLidar, kRadar };

// LiDAR points carry (x, y, z, intensity); radar points (x, y, z, rcs, v).
struct PointCloud {
    SensorKind kind = SensorKind::kLidar;
    std::vector<double> data;  // row-major, point_dim() values per point

    int point_dim() const { return kind == SensorKind::kLidar ? 4 : 5; }
    int size() const { return static_cast<int>(data.size()) / point_dim(); }
    const double* point(int i) const { return data.data() + (size_t)i * point_dim(); }
};

struct GridSpec {
    double x_min = 0.0, x_max = 51.2;
    double y_min = -25.6, y_max = 25.6;
    double cell = 0.32;  // raw grid resolution (meters)
    int max_points_lidar = 32;
    int max_points_radar = 10;
    int bev_channels = 32;                          // pillar feature width C0
    std::array<int, 3> stage_channels = {64, 128, 256};

    static GridSpec full();     // 160x160 raw, stages 80/40/20
    static GridSpec reduced();  // 80x80 raw, stages 40/20/10, narrow channels

    int raw_h() const;  // rows index y
    int raw_w() const;  // cols index x
    int stage_h(int stage) const { return raw_h() >> (stage + 1); }  // stage in {0,1,2}
    int stage_w(int stage) const { return raw_w() >> (stage + 1); }
    double head_cell() const { return 2.0 * cell; }  // stage-3 resolution
    int max_points(SensorKind kind) const {
        return kind == SensorKind::kLidar ? max_points_lidar : max_points_radar;
    }
    bool contains(double x, double y) const {
        return x >= x_min && x < x_max && y >= y_min && y < y_max;
    }
};

struct Pillar {
    int row = 0, col = 0;
    int count = 0;               // points kept (<= per-sensor cap)
    std::vector<double> feats;   // count x feat_dim, feat = raw fields ++ centroid offsets
};

struct PillarSet {
    int feat_dim = 0;  // point_dim + 3
    std::vector<Pillar> pillars;  // unique cells, ordered by flat cell index
};

// Bins in-range points into pillars; per-cell caps enforced by seeded random
// subsampling applied after a canonical (x,y,z) lexicographic sort.
PillarSet pillarize(const PointCloud& cloud, const GridSpec& grid, std::uint64_t seed);

struct EncodedPillars {
    std::vector<int> cells;  // flat raw-grid indices, unique
    Tensor feats;            // [C0, N]: per-pillar reduced vectors
};

// Shared linear map over point features followed by max over the points of
// each pillar.
EncodedPillars encode_pillars(const PillarSet& set, const GridSpec& grid, const Tensor& W,
                              const Tensor& b);

// Places each reduced pillar vector at its cell; empty cells stay zero.
Tensor scatter_bev(const EncodedPillars& enc, const GridSpec& grid);

// One conv unit: 3x3 conv -> instance norm -> GeLU.
struct ConvUnit {
    Tensor w, b, gamma, beta;
    int stride = 1;

    ConvUnit() = default;
    ConvUnit(int cin, int cout, int stride, std::mt19937_64& rng);
    Tensor forward(const Tensor& x) const;
    void params(std::vector<Tensor*>& out);
};

// Three stages of two conv units each; the first unit of every stage is
// strided so stage resolutions halve (raw -> H/2 -> H/4 -> H/8).
class Backbone {
public:
    Backbone(const GridSpec& grid, std::mt19937_64& rng);
    std::array<Tensor, 3> forward(const Tensor& bev) const;
    void params(std::vector<Tensor*>& out);

private:
    std::array<ConvUnit, 6> units_;
};

// Projects stages 4/5 to the stage-3 width, upsamples back to stage-3
// resolution, concatenates and fuses with a 1x1 conv to 2*C3 channels.
class Fpn {
public:
    Fpn(const GridSpec& grid, std::mt19937_64& rng);
    Tensor forward(const std::array<Tensor, 3>& stages) const;
    int out_channels() const { return out_channels_; }
    void params(std::vector<Tensor*>& out);

private:
    Tensor p4_w_, p4_b_, p5_w_, p5_b_, fuse_w_, fuse_b_;
    int out_channels_ = 0;
};

}  // namespace lrf
