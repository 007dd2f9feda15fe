// SPDX-License-Identifier: MIT
//
// Full grounding pipeline: prompt embedding, per-sensor pillar encoding and
// strided backbones, per-stage bidirectional agent cross attention followed
// by text-gated graph fusion, FPN re-aggregation and the edge-anchored
// grounding head.

#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "lrf/baca.hpp"
#include "lrf/dggf.hpp"
#include "lrf/head.hpp"
#include "lrf/pillars.hpp"
#include "lrf/scenes.hpp"
#include "lrf/text_encoder.hpp"

namespace lrf {

struct ModelConfig {
    GridSpec grid = GridSpec::full();
    int text_channels = 32;
    int agent_side = 12;  // agent grid side, clamped per stage to extent/2
    std::array<int, 3> k_steps = {8, 4, 2};
    int head_mid = 64;
    GatePool pool = GatePool::kMax;
    GraphMode graph = GraphMode::kDynamic;
    AnchorMode anchor = AnchorMode::kEdge;
    double score_threshold = 0.3;
    int max_boxes = 8;

    static ModelConfig full();
    static ModelConfig reduced();  // desk-scale: 40x40 head grid, 16 channels
};

class GroundingModel {
public:
    GroundingModel(const ModelConfig& cfg, std::mt19937_64& rng);

    // Deterministic given inputs; `seed` only drives pillar subsampling when
    // per-cell point caps are hit.
    HeadOutput forward(const PointCloud& lidar, const PointCloud& radar,
                       const std::string& prompt, std::uint64_t seed = 0) const;
    HeadOutput forward(const SceneRecord& rec) const;
    std::vector<Detection> detect(const SceneRecord& rec) const;

    // Head targets for the referred object of the scene.
    HeadTargets targets(const Scene& scene) const;

    std::vector<Tensor*> params();
    std::int64_t param_count();
    const ModelConfig& config() const { return cfg_; }
    TextEncoder& text() { return text_; }

private:
    ModelConfig cfg_;
    TextEncoder text_;
    Tensor enc_lw_, enc_lb_;  // lidar pillar features: [C0,7], [C0]
    Tensor enc_rw_, enc_rb_;  // radar pillar features: [C0,8], [C0]
    Backbone bb_lidar_, bb_radar_;
    std::array<BacaParams, 3> baca_;
    std::array<DggfParams, 3> dggf_;
    Fpn fpn_;
    HeadParams head_;
};

}  // namespace lrf
