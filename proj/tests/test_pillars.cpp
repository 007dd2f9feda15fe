// SPDX-License-Identifier: MIT
//
// Pillar encoding, BEV scatter, backbone and FPN tests. Hand-computed
// expectations for the binning/reduction logic, shape contracts for the
// full-size grid, and a finite-difference check through the whole
// pillars -> backbone -> FPN pipeline on a tiny grid.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "lrf/pillars.hpp"
#include "lrf/tensor.hpp"
#include "testing.hpp"

using namespace lrf;

namespace {

PointCloud make_cloud(SensorKind kind, const std::vector<double>& data) {
    PointCloud c;
    c.kind = kind;
    c.data = data;
    return c;
}

GridSpec tiny_grid() {
    GridSpec g;
    g.x_min = 0.0;
    g.x_max = 2.56;
    g.y_min = -1.28;
    g.y_max = 1.28;
    g.cell = 0.32;
    g.bev_channels = 2;
    g.stage_channels = {2, 3, 4};
    return g;
}

void test_grid_geometry() {
    GridSpec full = GridSpec::full();
    REQUIRE(full.raw_h() == 160 && full.raw_w() == 160, "full raw grid is 160x160");
    REQUIRE(full.stage_h(0) == 80 && full.stage_h(1) == 40 && full.stage_h(2) == 20,
            "full stage heights 80/40/20");
    REQUIRE_NEAR(full.head_cell(), 0.64, 1e-12, "head cell is twice the raw cell");

    GridSpec red = GridSpec::reduced();
    REQUIRE(red.raw_h() == 80 && red.raw_w() == 80, "reduced raw grid is 80x80");
    REQUIRE(red.stage_h(0) == 40 && red.stage_h(1) == 20 && red.stage_h(2) == 10,
            "reduced stage heights 40/20/10");
    REQUIRE(red.bev_channels == 8, "reduced pillar width 8");
    REQUIRE(red.stage_channels[2] == 64, "reduced stage-3 width 64");

    REQUIRE(full.contains(0.0, -25.6), "min corner inside");
    REQUIRE(!full.contains(51.2, 0.0), "x upper bound excluded");
    REQUIRE(!full.contains(0.0, 25.6), "y upper bound excluded");
}

void test_pillarize_single_point() {
    GridSpec grid = GridSpec::full();
    PointCloud cloud = make_cloud(SensorKind::kLidar, {0.5, 0.1, -1.0, 0.9});
    PillarSet set = pillarize(cloud, grid, 1);
    REQUIRE(set.feat_dim == 7, "lidar feature width 4+3");
    REQUIRE(set.pillars.size() == 1, "one pillar");
    const Pillar& p = set.pillars[0];
    REQUIRE(p.count == 1, "one point kept");
    REQUIRE(p.col == 1, "col = floor(0.5/0.32)");
    REQUIRE(p.row == 80, "row = floor((0.1+25.6)/0.32)");
    const std::vector<double> want = {0.5, 0.1, -1.0, 0.9, 0.0, 0.0, 0.0};
    for (int k = 0; k < 7; ++k)
        REQUIRE_NEAR(p.feats[(size_t)k], want[(size_t)k], 1e-12, "raw fields + zero offsets");
}

void test_pillarize_centroid_offsets() {
    GridSpec grid = GridSpec::full();
    PointCloud cloud = make_cloud(SensorKind::kLidar,
                                  {0.1, 0.1, 0.0, 1.0, 0.2, 0.2, 0.5, 0.3});
    PillarSet set = pillarize(cloud, grid, 1);
    REQUIRE(set.pillars.size() == 1, "both points share one cell");
    const Pillar& p = set.pillars[0];
    REQUIRE(p.count == 2, "two points kept");
    // Canonical sort puts the smaller-x point first.
    const std::vector<double> want = {0.1, 0.1, 0.0, 1.0, -0.05, -0.05, -0.25,
                                      0.2, 0.2, 0.5, 0.3, 0.05,  0.05,  0.25};
    for (size_t k = 0; k < want.size(); ++k)
        REQUIRE_NEAR(p.feats[k], want[k], 1e-12, "offsets relative to the centroid");
    // Offsets over a pillar always sum to zero.
    for (int k = 4; k < 7; ++k)
        REQUIRE_NEAR(p.feats[(size_t)k] + p.feats[(size_t)(7 + k)], 0.0, 1e-12,
                     "offset columns sum to zero");
}

void test_pillarize_caps_and_determinism() {
    GridSpec grid = GridSpec::full();
    std::vector<double> lidar, radar;
    for (int i = 0; i < 40; ++i) {
        const double x = 0.001 * i;
        lidar.insert(lidar.end(), {x, 0.0, 0.1, 0.5});
        radar.insert(radar.end(), {x, 0.0, 0.1, 4.0, -2.0});
    }
    PillarSet ls = pillarize(make_cloud(SensorKind::kLidar, lidar), grid, 3);
    PillarSet rs = pillarize(make_cloud(SensorKind::kRadar, radar), grid, 3);
    REQUIRE(ls.pillars.size() == 1 && ls.pillars[0].count == 32, "lidar cap 32");
    REQUIRE(rs.feat_dim == 8, "radar feature width 5+3");
    REQUIRE(rs.pillars.size() == 1 && rs.pillars[0].count == 10, "radar cap 10");

    // Same seed, permuted input -> identical pillars (canonical order first).
    std::vector<double> shuffled = lidar;
    std::mt19937_64 rng(99);
    std::vector<int> idx(40);
    for (int i = 0; i < 40; ++i) idx[(size_t)i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < 40; ++i)
        for (int k = 0; k < 4; ++k)
            shuffled[(size_t)i * 4 + k] = lidar[(size_t)idx[(size_t)i] * 4 + k];
    PillarSet ls2 = pillarize(make_cloud(SensorKind::kLidar, shuffled), grid, 3);
    REQUIRE(ls2.pillars[0].feats == ls.pillars[0].feats,
            "subsample independent of input order");

    PillarSet ls3 = pillarize(make_cloud(SensorKind::kLidar, lidar), grid, 4);
    REQUIRE(ls3.pillars[0].feats != ls.pillars[0].feats, "different seed, different subset");
}

void test_pillarize_range_filter_and_order() {
    GridSpec grid = GridSpec::full();
    PointCloud cloud = make_cloud(
        SensorKind::kLidar,
        {51.2, 0.0, 0.0, 1.0,    // x == x_max: dropped
         0.0, 25.6, 0.0, 1.0,    // y == y_max: dropped
         0.0, 0.0, 0.0, 1.0,     // kept, row 80 col 0
         0.0, -25.6, 0.0, 1.0,   // kept, row 0 col 0
         -0.1, 0.0, 0.0, 1.0});  // x < x_min: dropped
    PillarSet set = pillarize(cloud, grid, 1);
    REQUIRE(set.pillars.size() == 2, "out-of-range points dropped");
    REQUIRE(set.pillars[0].row == 0 && set.pillars[1].row == 80,
            "pillars ordered by flat cell index");
    REQUIRE_THROWS(pillarize(make_cloud(SensorKind::kLidar, {1.0, 2.0, 3.0}), grid, 1),
                   "ragged point buffer rejected");
}

void test_encode_identity_map() {
    GridSpec grid = GridSpec::full();
    std::vector<double> eye(7 * 7, 0.0);
    for (int k = 0; k < 7; ++k) eye[(size_t)k * 7 + k] = 1.0;
    Tensor W = Tensor::from_data({7, 7}, eye);
    Tensor b = Tensor::zeros({7});

    PointCloud cloud = make_cloud(SensorKind::kLidar,
                                  {0.1, 0.1, 0.0, 1.0, 0.2, 0.2, 0.5, 0.3});
    PillarSet set = pillarize(cloud, grid, 1);
    EncodedPillars enc = encode_pillars(set, grid, W, b);
    REQUIRE(enc.feats.dim(0) == 7 && enc.feats.dim(1) == 1, "[C0, N] layout");
    REQUIRE(enc.cells.size() == 1 && enc.cells[0] == 80 * 160 + 0, "flat cell index");
    // Identity map + max over the two points, coordinate-wise.
    const std::vector<double> want = {0.2, 0.2, 0.5, 1.0, 0.05, 0.05, 0.25};
    for (int k = 0; k < 7; ++k)
        REQUIRE_NEAR(enc.feats.value()[(size_t)k], want[(size_t)k], 1e-12,
                     "pointwise max of mapped features");

    Tensor bad = Tensor::zeros({7, 5});
    REQUIRE_THROWS(encode_pillars(set, grid, bad, b), "feature width mismatch rejected");
}

void test_scatter_conservation() {
    GridSpec grid = tiny_grid();
    std::mt19937_64 rng(5);
    PointCloud cloud = make_cloud(SensorKind::kLidar,
                                  {0.05, -1.0, 0.0, 1.0,
                                   1.00, 0.5, 0.2, 0.4,
                                   2.50, 1.2, -0.3, 0.8});
    PillarSet set = pillarize(cloud, grid, 1);
    REQUIRE(set.pillars.size() == 3, "three occupied cells");
    Tensor W = Tensor::param({2, 7}, 7, rng);
    Tensor b = Tensor::param({2}, 7, rng);
    EncodedPillars enc = encode_pillars(set, grid, W, b);
    Tensor bev = scatter_bev(enc, grid);
    REQUIRE(bev.dim(0) == 2 && bev.dim(1) == 8 && bev.dim(2) == 8, "[C0,H,W] map");

    double map_sum = 0.0, feat_sum = 0.0;
    for (double v : bev.value()) map_sum += v;
    for (double v : enc.feats.value()) feat_sum += v;
    REQUIRE_NEAR(map_sum, feat_sum, 1e-9, "scatter moves values without loss");

    for (size_t j = 0; j < enc.cells.size(); ++j)
        for (int c = 0; c < 2; ++c)
            REQUIRE_NEAR(bev.value()[(size_t)c * 64 + enc.cells[j]],
                         enc.feats.value()[(size_t)c * enc.cells.size() + j], 1e-12,
                         "pillar vector lands at its cell");

    // Empty cloud scatters to an all-zero map of the configured width.
    PillarSet empty = pillarize(make_cloud(SensorKind::kLidar, {}), grid, 1);
    Tensor zero_bev = scatter_bev(encode_pillars(empty, grid, W, b), grid);
    REQUIRE(zero_bev.dim(0) == 2 && zero_bev.numel() == 2 * 64, "empty map shape");
    for (double v : zero_bev.value()) REQUIRE(v == 0.0, "empty map stays zero");
}

void test_backbone_shapes_full_grid() {
    GridSpec grid = GridSpec::full();
    std::mt19937_64 rng(11);
    Backbone bb(grid, rng);
    Fpn fpn(grid, rng);
    Tensor bev = Tensor::uniform({grid.bev_channels, 160, 160}, -1.0, 1.0, rng);
    std::array<Tensor, 3> stages = bb.forward(bev);
    REQUIRE(stages[0].dim(0) == 64 && stages[0].dim(1) == 80 && stages[0].dim(2) == 80,
            "stage 1 is [64,80,80]");
    REQUIRE(stages[1].dim(0) == 128 && stages[1].dim(1) == 40 && stages[1].dim(2) == 40,
            "stage 2 is [128,40,40]");
    REQUIRE(stages[2].dim(0) == 256 && stages[2].dim(1) == 20 && stages[2].dim(2) == 20,
            "stage 3 is [256,20,20]");
    Tensor fused = fpn.forward(stages);
    REQUIRE(fpn.out_channels() == 128, "FPN fuses to 2x stage-1 width");
    REQUIRE(fused.dim(0) == 128 && fused.dim(1) == 80 && fused.dim(2) == 80,
            "FPN output at stage-1 resolution");
}

void test_backbone_zero_propagation() {
    GridSpec grid = GridSpec::reduced();
    std::mt19937_64 rng(13);
    Backbone bb(grid, rng);
    Tensor bev = Tensor::zeros({grid.bev_channels, 80, 80});
    std::array<Tensor, 3> stages = bb.forward(bev);
    // Zero map -> normalization keeps zero -> GeLU(0)=0, stage by stage.
    for (const Tensor& s : stages)
        for (double v : s.value()) REQUIRE(v == 0.0, "zero input propagates to zero");
}

void test_pipeline_grad() {
    GridSpec grid = tiny_grid();
    std::mt19937_64 rng(17);
    PointCloud cloud = make_cloud(SensorKind::kLidar,
                                  {0.05, -1.0, 0.0, 1.0,
                                   0.07, -1.05, 0.4, 0.2,
                                   1.00, 0.5, 0.2, 0.4,
                                   1.90, -0.3, -0.1, 0.6,
                                   2.50, 1.2, -0.3, 0.8});
    PillarSet set = pillarize(cloud, grid, 2);

    Tensor W = Tensor::param({2, 7}, 7, rng);
    Tensor b = Tensor::zeros({2}, true);
    Backbone bb(grid, rng);
    Fpn fpn(grid, rng);

    std::vector<Tensor*> ptrs{&W, &b};
    bb.params(ptrs);
    fpn.params(ptrs);
    std::vector<Tensor> leaves;
    for (Tensor* t : ptrs) leaves.push_back(*t);

    auto f = [&](const std::vector<Tensor>&) {
        Tensor bev = scatter_bev(encode_pillars(set, grid, W, b), grid);
        return sum(fpn.forward(bb.forward(bev)));
    };
    const double err = grad_check(f, leaves);
    REQUIRE(err < 1e-4, "pipeline gradients match finite differences");
}

}  // namespace

int main() {
    RUN(test_grid_geometry);
    RUN(test_pillarize_single_point);
    RUN(test_pillarize_centroid_offsets);
    RUN(test_pillarize_caps_and_determinism);
    RUN(test_pillarize_range_filter_and_order);
    RUN(test_encode_identity_map);
    RUN(test_scatter_conservation);
    RUN(test_backbone_shapes_full_grid);
    RUN(test_backbone_zero_propagation);
    RUN(test_pipeline_grad);
    return finish("test_pillars");
}
