// SPDX-License-Identifier: MIT

#include "lrf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lrf {

std::vector<GroundingSample> evaluate(const GroundingModel& model,
                                      const std::vector<SceneRecord>& data,
                                      double iou_thr) {
    std::vector<GroundingSample> out;
    for (const SceneRecord& rec : data) {
        const int ref = rec.scene.referred.at(0);
        out.push_back(score_scene(model.detect(rec), rec.scene.objects[ref].box,
                                  rec.scene.objects[ref].cls, iou_thr));
    }
    return out;
}

TrainResult train_overfit(GroundingModel& model, const std::vector<SceneRecord>& data,
                          const TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_overfit: empty dataset");
    OptConfig oc;
    oc.lr = cfg.lr;
    oc.lr_min = cfg.lr * cfg.lr_min_frac;
    oc.steps = cfg.max_steps;
    oc.adamw = cfg.adamw;
    oc.weight_decay = cfg.weight_decay;
    std::vector<Tensor*> params = model.params();
    Optimizer opt(params, oc);

    std::mt19937_64 rng(cfg.shuffle_seed);
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult res;
    for (int step = 0; step < cfg.max_steps; ++step) {
        const int slot = step % (int)data.size();
        if (slot == 0) std::shuffle(order.begin(), order.end(), rng);
        const SceneRecord& rec = data[order[slot]];

        const HeadOutput out = model.forward(rec);
        const HeadTargets tgt = model.targets(rec.scene);
        const LossParts loss = total_loss(out, tgt, cfg.beta);
        const double total = loss.total.item();
        res.curve.push_back({step, loss.hm.item(), loss.reg.item(), total});
        if (!std::isfinite(total) || total > cfg.divergence_loss) {
            res.diverged = true;
            res.steps = step;
            return res;
        }
        loss.total.backward();
        opt.step();
        res.steps = step + 1;

        if (cfg.target_accuracy > 0.0 && (step + 1) % cfg.eval_every == 0) {
            const double acc =
                grounding_accuracy(evaluate(model, data, cfg.iou_thr));
            if (acc >= cfg.target_accuracy) break;
        }
    }
    const std::vector<GroundingSample> samples = evaluate(model, data, cfg.iou_thr);
    res.accuracy = grounding_accuracy(samples);
    res.loc_error = mean_loc_error(samples);
    return res;
}

void write_curve(const std::vector<LossRow>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_curve: cannot open " + path);
    out << "step,L_hm,L_reg,L_total\n";
    for (const LossRow& r : curve) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", r.step, r.hm, r.reg, r.total);
        out << buf;
    }
}

}  // namespace lrf
