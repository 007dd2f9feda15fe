// SPDX-License-Identifier: MIT

#include "lrf/training.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace lrf {

Tensor focal_heatmap_loss(const Tensor& pred, const Tensor& target) {
    for (double v : pred.value())
        if (!(v > 0.0 && v < 1.0))
            throw std::invalid_argument("focal_heatmap_loss: prediction outside (0,1)");
    return focal_loss(pred, target);
}

Tensor smooth_l1_mean(const Tensor& pred, const Tensor& target) {
    return mul_scalar(smooth_l1_sum(pred, target), 1.0 / (double)pred.numel());
}

LossParts total_loss(const HeadOutput& out, const HeadTargets& tgt, double beta) {
    LossParts parts;
    parts.hm = focal_heatmap_loss(out.heatmap, tgt.heatmap);
    if (tgt.peak_cells.empty()) {
        parts.reg = Tensor::zeros({1});
        parts.total = parts.hm;
        return parts;
    }
    Tensor pred_g = gather_cells(out.reg, tgt.peak_cells);
    Tensor tgt_g = gather_cells(tgt.reg, tgt.peak_cells);
    parts.reg = mul_scalar(smooth_l1_sum(pred_g, tgt_g),
                           1.0 / (double)tgt.peak_cells.size());
    parts.total = add(parts.hm, mul_scalar(parts.reg, beta));
    return parts;
}

double cosine_lr(double lr0, double lr_min, int step, int total) {
    if (total <= 0) return lr0;
    const double t = std::min(1.0, std::max(0.0, (double)step / (double)total));
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(3.14159265358979323846 * t));
}

Optimizer::Optimizer(std::vector<Tensor*> params, OptConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.adamw) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign((size_t)params_[i]->numel(), 0.0);
            v_[i].assign((size_t)params_[i]->numel(), 0.0);
        }
    }
}

void Optimizer::step() {
    const double lr = cosine_lr(cfg_.lr, cfg_.lr_min, t_, cfg_.steps);
    ++t_;
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor* p = params_[i];
        if (!p->requires_grad()) continue;
        const std::vector<double>& g = p->grad();
        std::vector<double>& w = p->value();
        if (g.size() != w.size()) continue;  // never reached the loss: no update
        if (!cfg_.adamw) {
            for (size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
        } else {
            const double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
            const double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
            for (size_t j = 0; j < w.size(); ++j) {
                m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
                v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                const double mh = m_[i][j] / bc1, vh = v_[i][j] / bc2;
                w[j] -= lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * w[j]);
            }
        }
        p->zero_grad();
    }
}

void save_params(const std::string& path, const std::vector<Tensor*>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_params: cannot open " + path);
    const std::uint64_t n = params.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const Tensor* p : params) {
        const std::uint32_t rank = (std::uint32_t)p->rank();
        out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
        for (int d = 0; d < (int)rank; ++d) {
            const std::int64_t dim = p->dim(d);
            out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        }
        out.write(reinterpret_cast<const char*>(p->value().data()),
                  (std::streamsize)(p->value().size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

void load_params(const std::string& path, const std::vector<Tensor*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_params: cannot open " + path);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (n != params.size())
        throw std::runtime_error("load_params: file holds " + std::to_string(n) +
                                 " tensors, model has " + std::to_string(params.size()));
    for (Tensor* p : params) {
        std::uint32_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
        if ((int)rank != p->rank())
            throw std::runtime_error("load_params: rank mismatch in " + path);
        for (int d = 0; d < (int)rank; ++d) {
            std::int64_t dim = 0;
            in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
            if (dim != p->dim(d))
                throw std::runtime_error("load_params: shape mismatch in " + path);
        }
        in.read(reinterpret_cast<char*>(p->value().data()),
                (std::streamsize)(p->value().size() * sizeof(double)));
        if (!in) throw std::runtime_error("load_params: truncated file " + path);
    }
}

}  // namespace lrf
