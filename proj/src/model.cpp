// SPDX-License-Identifier: MIT

#include "lrf/model.hpp"

#include <stdexcept>

namespace lrf {

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::reduced() {
    ModelConfig cfg;
    cfg.grid = GridSpec::reduced();
    cfg.text_channels = 16;
    cfg.agent_side = 8;
    // The narrow trunk needs a wide head: below ~64 mid channels the
    // regression branch plateaus at dataset-mean dims/yaw instead of
    // fitting per-scene geometry.
    cfg.head_mid = 64;
    return cfg;
}

namespace {

Tensor encoder_weight(int c0, int feat_dim, std::mt19937_64& rng) {
    const double s = 1.0 / std::sqrt((double)feat_dim);
    return Tensor::uniform({c0, feat_dim}, -s, s, rng, true);
}

}  // namespace

GroundingModel::GroundingModel(const ModelConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg),
      text_(Vocabulary::build_default(), cfg.text_channels, rng),
      enc_lw_(encoder_weight(cfg.grid.bev_channels, 7, rng)),
      enc_lb_(Tensor::zeros({cfg.grid.bev_channels}, true)),
      enc_rw_(encoder_weight(cfg.grid.bev_channels, 8, rng)),
      enc_rb_(Tensor::zeros({cfg.grid.bev_channels}, true)),
      bb_lidar_(cfg.grid, rng),
      bb_radar_(cfg.grid, rng),
      fpn_(cfg.grid, rng),
      head_(2 * cfg.grid.stage_channels[0], cfg.head_mid, rng) {
    for (int i = 0; i < 3; ++i) {
        const int c = cfg.grid.stage_channels[i];
        baca_[i] = BacaParams(c, rng);
        baca_[i].agent_h = cfg.agent_side;
        baca_[i].agent_w = cfg.agent_side;
        dggf_[i] = DggfParams(c, cfg.text_channels, cfg.k_steps[i], rng);
        dggf_[i].pool = cfg.pool;
        dggf_[i].mode = cfg.graph;
    }
}

HeadOutput GroundingModel::forward(const PointCloud& lidar, const PointCloud& radar,
                                   const std::string& prompt, std::uint64_t seed) const {
    if (lidar.kind != SensorKind::kLidar || radar.kind != SensorKind::kRadar)
        throw std::invalid_argument("forward: sensor kinds swapped");
    const Tensor bev_l = scatter_bev(
        encode_pillars(pillarize(lidar, cfg_.grid, seed), cfg_.grid, enc_lw_, enc_lb_),
        cfg_.grid);
    const Tensor bev_r = scatter_bev(
        encode_pillars(pillarize(radar, cfg_.grid, seed ^ 0xabcdULL), cfg_.grid, enc_rw_,
                       enc_rb_),
        cfg_.grid);
    const std::array<Tensor, 3> st_l = bb_lidar_.forward(bev_l);
    const std::array<Tensor, 3> st_r = bb_radar_.forward(bev_r);
    const Tensor f_t = text_.embed_prompt(prompt);

    std::array<Tensor, 3> fused;
    for (int i = 0; i < 3; ++i) {
        const Tensor lr = baca_forward(st_l[i], st_r[i], baca_[i]);
        fused[i] = dggf_forward(f_t, lr, dggf_[i]);
    }
    return head_forward(fpn_.forward(fused), head_);
}

HeadOutput GroundingModel::forward(const SceneRecord& rec) const {
    return forward(rec.lidar, rec.radar, rec.scene.prompt, rec.scene.seed);
}

std::vector<Detection> GroundingModel::detect(const SceneRecord& rec) const {
    return decode(forward(rec), cfg_.grid, cfg_.score_threshold, cfg_.max_boxes);
}

HeadTargets GroundingModel::targets(const Scene& scene) const {
    std::vector<Box3D> boxes;
    for (int idx : scene.referred) boxes.push_back(scene.objects.at(idx).box);
    return build_targets(boxes, cfg_.grid, cfg_.anchor);
}

std::vector<Tensor*> GroundingModel::params() {
    std::vector<Tensor*> out;
    out.push_back(&text_.table());
    out.push_back(&enc_lw_);
    out.push_back(&enc_lb_);
    out.push_back(&enc_rw_);
    out.push_back(&enc_rb_);
    bb_lidar_.params(out);
    bb_radar_.params(out);
    for (int i = 0; i < 3; ++i) baca_[i].params(out);
    for (int i = 0; i < 3; ++i) dggf_[i].params(out);
    fpn_.params(out);
    head_.params(out);
    return out;
}

std::int64_t GroundingModel::param_count() {
    std::int64_t n = 0;
    for (const Tensor* t : params()) n += (std::int64_t)t->value().size();
    return n;
}

}  // namespace lrf
