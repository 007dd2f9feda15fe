// SPDX-License-Identifier: MIT

#include "lrf/head.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

namespace lrf {

double gaussian_radius(double height, double width, double min_overlap) {
    const double a1 = 1.0, b1 = height + width;
    const double c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
    const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * a1 * c1)) / 2.0;

    const double a2 = 4.0, b2 = 2.0 * (height + width);
    const double c2 = (1.0 - min_overlap) * width * height;
    const double r2 = (b2 + std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / 2.0;

    const double a3 = 4.0 * min_overlap, b3 = -2.0 * min_overlap * (height + width);
    const double c3 = (min_overlap - 1.0) * width * height;
    const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;
    return std::min({r1, r2, r3});
}

HeadTargets build_targets(const std::vector<Box3D>& boxes, const GridSpec& grid,
                          AnchorMode mode, Vec2 sensor) {
    const int Hh = grid.stage_h(0), Wh = grid.stage_w(0);
    const double hc = grid.head_cell();
    std::vector<double> heat((size_t)Hh * Wh, 0.0);
    std::vector<double> reg((size_t)10 * Hh * Wh, 0.0);
    HeadTargets t;

    for (const Box3D& box : boxes) {
        if (box.l <= 0.0 || box.w <= 0.0 || box.h <= 0.0)
            throw std::invalid_argument("build_targets: non-positive box extent");
        Vec2 anchor{box.x, box.y};
        if (mode == AnchorMode::kEdge) anchor = nearest_edge(box, sensor).anchor;

        const double ax = (anchor.x - grid.x_min) / hc;
        const double ay = (anchor.y - grid.y_min) / hc;
        const int col = (int)std::floor(ax), row = (int)std::floor(ay);
        if (col < 0 || col >= Wh || row < 0 || row >= Hh) {
            std::cerr << "build_targets: anchor (" << anchor.x << "," << anchor.y
                      << ") outside grid, box skipped\n";
            ++t.skipped;
            continue;
        }

        const int r =
            std::max(2, (int)gaussian_radius(box.w / hc, box.l / hc));
        const double sigma = (2.0 * r + 1.0) / 6.0;
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const int rr = row + dy, cc = col + dx;
                if (rr < 0 || rr >= Hh || cc < 0 || cc >= Wh) continue;
                const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                double& cell = heat[(size_t)rr * Wh + cc];
                cell = std::max(cell, g);
            }
        const size_t at = (size_t)row * Wh + col;
        heat[at] = 1.0;  // the peak itself is exact
        t.peak_cells.push_back(row * Wh + col);

        const size_t plane = (size_t)Hh * Wh;
        // Two boxes anchoring in one cell overwrite; acceptable at this
        // scale since grounding scenes keep anchors apart.
        reg[0 * plane + at] = ax - col;
        reg[1 * plane + at] = ay - row;
        reg[2 * plane + at] = box.x - anchor.x;
        reg[3 * plane + at] = box.y - anchor.y;
        reg[4 * plane + at] = box.z;
        reg[5 * plane + at] = std::log(box.l);
        reg[6 * plane + at] = std::log(box.w);
        reg[7 * plane + at] = std::log(box.h);
        reg[8 * plane + at] = std::sin(box.yaw);
        reg[9 * plane + at] = std::cos(box.yaw);
    }
    t.heatmap = Tensor::from_data({1, Hh, Wh}, std::move(heat));
    t.reg = Tensor::from_data({10, Hh, Wh}, std::move(reg));
    return t;
}

HeadParams::HeadParams(int c_in, int mid, std::mt19937_64& rng) {
    hm_w1 = Tensor::param({mid, c_in, 3, 3}, c_in * 9, rng);
    hm_b1 = Tensor::zeros({mid}, true);
    hm_w2 = Tensor::param({1, mid, 1, 1}, mid, rng);
    hm_b2 = Tensor::zeros({1}, true);
    reg_w1 = Tensor::param({mid, c_in, 3, 3}, c_in * 9, rng);
    reg_b1 = Tensor::zeros({mid}, true);
    reg_w2 = Tensor::param({10, mid, 1, 1}, mid, rng);
    reg_b2 = Tensor::zeros({10}, true);
}

void HeadParams::params(std::vector<Tensor*>& out) {
    for (Tensor* t : {&hm_w1, &hm_b1, &hm_w2, &hm_b2, &reg_w1, &reg_b1, &reg_w2, &reg_b2})
        out.push_back(t);
}

HeadOutput head_forward(const Tensor& f, const HeadParams& p) {
    HeadOutput out;
    out.heatmap = sigmoid(conv2d(gelu(conv2d(f, p.hm_w1, p.hm_b1, 1, 1)), p.hm_w2, p.hm_b2));
    out.reg = conv2d(gelu(conv2d(f, p.reg_w1, p.reg_b1, 1, 1)), p.reg_w2, p.reg_b2);
    return out;
}

std::vector<Detection> decode(const HeadOutput& out, const GridSpec& grid,
                              double score_threshold, int max_boxes) {
    const int Hh = out.heatmap.dim(1), Wh = out.heatmap.dim(2);
    const double hc = grid.head_cell();
    const std::vector<double>& heat = out.heatmap.value();
    const std::vector<double>& reg = out.reg.value();
    const size_t plane = (size_t)Hh * Wh;

    std::vector<Detection> dets;
    for (int r = 0; r < Hh; ++r)
        for (int c = 0; c < Wh; ++c) {
            const double v = heat[(size_t)r * Wh + c];
            if (v < score_threshold) continue;
            bool peak = true;
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int rr = r + dy, cc = c + dx;
                    if (rr < 0 || rr >= Hh || cc < 0 || cc >= Wh) continue;
                    if (heat[(size_t)rr * Wh + cc] > v) {
                        peak = false;
                        break;
                    }
                }
            if (!peak) continue;

            const size_t at = (size_t)r * Wh + c;
            const double ax = grid.x_min + (c + reg[0 * plane + at]) * hc;
            const double ay = grid.y_min + (r + reg[1 * plane + at]) * hc;
            Detection d;
            d.score = v;
            d.box.x = ax + reg[2 * plane + at];
            d.box.y = ay + reg[3 * plane + at];
            d.box.z = reg[4 * plane + at];
            d.box.l = std::exp(reg[5 * plane + at]);
            d.box.w = std::exp(reg[6 * plane + at]);
            d.box.h = std::exp(reg[7 * plane + at]);
            d.box.yaw = normalize_angle(std::atan2(reg[8 * plane + at], reg[9 * plane + at]));
            dets.push_back(d);
        }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    if ((int)dets.size() > max_boxes) dets.resize((size_t)max_boxes);
    return dets;
}

}  // namespace lrf
