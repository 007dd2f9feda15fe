// SPDX-License-Identifier: MIT
//
// Single-worker overfit loop for the grounding model: per-scene gradient
// steps with cosine decay, periodic train-set grounding evaluation with
// early stop, divergence abort, and loss-curve export.

#pragma once

#include <string>
#include <vector>

#include "lrf/eval.hpp"
#include "lrf/model.hpp"
#include "lrf/training.hpp"

namespace lrf {

struct TrainConfig {
    int max_steps = 2000;
    double lr = 2e-3;
    double lr_min_frac = 0.1;  // floor = lr * frac at the cosine horizon
    bool adamw = true;
    double weight_decay = 0.0;
    double beta = 0.25;  // regression weight in the total loss
    int eval_every = 50;
    double target_accuracy = 0.9;  // early stop at or above, <= 0 disables
    double iou_thr = 0.5;
    double divergence_loss = 1e6;
    std::uint64_t shuffle_seed = 1;
};

struct LossRow {
    int step = 0;
    double hm = 0.0, reg = 0.0, total = 0.0;
};

struct TrainResult {
    std::vector<LossRow> curve;
    int steps = 0;
    double accuracy = 0.0;       // final train-set grounding accuracy
    double loc_error = 0.0;      // mean top-1 center error (NaN if no preds)
    bool diverged = false;
};

std::vector<GroundingSample> evaluate(const GroundingModel& model,
                                      const std::vector<SceneRecord>& data,
                                      double iou_thr);

TrainResult train_overfit(GroundingModel& model, const std::vector<SceneRecord>& data,
                          const TrainConfig& cfg);

// "step,L_hm,L_reg,L_total" rows.
void write_curve(const std::vector<LossRow>& curve, const std::string& path);

}  // namespace lrf
