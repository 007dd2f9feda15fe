// SPDX-License-Identifier: MIT
//
// Grounding head over the fused BEV map: targets anchored at the box edge
// nearest the sensor (heatmap peak + ten regression channels at the peak
// cell), a two-branch conv head, and the inverse decoding back to boxes.
//
// Head cells live at stage-1 resolution: cell side = 2x the raw grid cell,
// rows index y, columns index x.
//
// Regression channel layout (written at the peak cell):
//   0,1  sub-cell offset of the anchor within its cell, in cell units [0,1)
//   2,3  BEV offset from anchor to box center, meters
//   4    center z, meters
//   5-7  log l, log w, log h
//   8,9  sin yaw, cos yaw

#pragma once

#include <random>
#include <vector>

#include "lrf/geometry.hpp"
#include "lrf/pillars.hpp"
#include "lrf/tensor.hpp"

namespace lrf {

enum class AnchorMode { kEdge, kCenter };

struct HeadTargets {
    Tensor heatmap;               // [1,Hh,Wh], peaks exactly 1
    Tensor reg;                   // [10,Hh,Wh], nonzero only at peak cells
    std::vector<int> peak_cells;  // flat row*Wh+col per kept box
    int skipped = 0;              // boxes whose anchor fell outside the grid
};

// Size-adaptive Gaussian radius (quadratic overlap bound, min_overlap 0.5
// by default); extents given in cells. Callers floor the result at 2.
double gaussian_radius(double h_cells, double w_cells, double min_overlap = 0.5);

HeadTargets build_targets(const std::vector<Box3D>& boxes, const GridSpec& grid,
                          AnchorMode mode = AnchorMode::kEdge, Vec2 sensor = {0.0, 0.0});

struct HeadParams {
    Tensor hm_w1, hm_b1, hm_w2, hm_b2;      // 3x3 -> GeLU -> 1x1, 1 channel
    Tensor reg_w1, reg_b1, reg_w2, reg_b2;  // 3x3 -> GeLU -> 1x1, 10 channels

    HeadParams() = default;
    HeadParams(int c_in, int mid, std::mt19937_64& rng);
    void params(std::vector<Tensor*>& out);
};

struct HeadOutput {
    Tensor heatmap;  // [1,H,W], sigmoid output in (0,1)
    Tensor reg;      // [10,H,W]
};

HeadOutput head_forward(const Tensor& f, const HeadParams& p);

struct Detection {
    Box3D box;
    double score = 0.0;
};

// Local maxima by 3x3 neighborhood equality (ties kept), thresholded, top
// max_boxes by score, regression channels inverted at each peak.
std::vector<Detection> decode(const HeadOutput& out, const GridSpec& grid,
                              double score_threshold, int max_boxes);

}  // namespace lrf
