// SPDX-License-Identifier: MIT
//
// Loss assembly and a minimal optimizer sufficient to overfit small
// synthetic sets: penalty-reduced focal heatmap loss plus beta-weighted
// smooth-l1 on the regression channels at peak cells, plain gradient descent
// with cosine step decay (AdamW behind a flag), and flat binary parameter
// serialization.

#pragma once

#include <string>
#include <vector>

#include "lrf/head.hpp"
#include "lrf/tensor.hpp"

namespace lrf {

struct LossParts {
    Tensor total;  // hm + beta * reg
    Tensor hm;
    Tensor reg;    // mean over peak cells, summed over the 10 channels
};

// CenterNet-form focal loss normalized by the peak count; rejects
// predictions outside the open interval (0,1).
Tensor focal_heatmap_loss(const Tensor& pred, const Tensor& target);

// Elementwise Huber kernel (quadratic branch at the |r|=1 kink), averaged
// over all elements.
Tensor smooth_l1_mean(const Tensor& pred, const Tensor& target);

LossParts total_loss(const HeadOutput& out, const HeadTargets& tgt, double beta = 0.25);

struct OptConfig {
    double lr = 0.1;
    double lr_min = 0.0;
    int steps = 500;        // cosine horizon
    bool adamw = false;
    double weight_decay = 0.0;  // decoupled, AdamW only
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Cosine decay from lr0 at step 0 to lr_min at step `total`.
double cosine_lr(double lr0, double lr_min, int step, int total);

class Optimizer {
public:
    Optimizer(std::vector<Tensor*> params, OptConfig cfg);
    // Applies one update from the accumulated gradients, then clears them.
    void step();
    int steps_taken() const { return t_; }

private:
    std::vector<Tensor*> params_;
    OptConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    int t_ = 0;
};

// Flat binary format: count, then per tensor rank, dims, doubles.
void save_params(const std::string& path, const std::vector<Tensor*>& params);
// Loads into existing tensors; shape mismatches are errors.
void load_params(const std::string& path, const std::vector<Tensor*>& params);

}  // namespace lrf
