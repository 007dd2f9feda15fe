// SPDX-License-Identifier: MIT
//
// Acceptance suite: one line per criterion, [PASS]/[FAIL] plus the measured
// values and runtime. Criterion 7 is directional-only by design; a miss is
// reported as [SOFT] and does not gate the exit code. Everything else does.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdlib>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lrf/baca.hpp"
#include "lrf/complexity.hpp"
#include "lrf/dggf.hpp"
#include "lrf/eval.hpp"
#include "lrf/geometry.hpp"
#include "lrf/head.hpp"
#include "lrf/model.hpp"
#include "lrf/oracles.hpp"
#include "lrf/scenes.hpp"
#include "lrf/trainer.hpp"
#include "lrf/training.hpp"

using namespace lrf;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void line(int criterion, bool ok, const std::string& what, double secs, bool soft = false) {
    const char* tag = ok ? "[PASS]" : soft ? "[SOFT]" : "[FAIL]";
    std::printf("%s criterion %d: %s (%.1fs)\n", tag, criterion, what.c_str(), secs);
    if (!ok && !soft) ++g_failures;
}

__attribute__((format(printf, 1, 2))) std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// --- criterion 1: dynamic-graph construction against an exhaustive oracle ---
void criterion1() {
    auto t0 = std::chrono::steady_clock::now();
    const OracleReport rep = oracle_dyn_conv(42, 200);
    const double secs = seconds_since(t0);
    line(1, rep.pass() && secs < 60.0,
         fmt("dynamic-graph oracle: %d trials, %d failures, max err %.2e%s%s", rep.trials,
             rep.failures, rep.max_err, rep.detail.empty() ? "" : " - ",
             rep.detail.c_str()),
         secs);
}

// --- criterion 2: nearest-edge anchor against exhaustive segment enumeration ---
void criterion2() {
    auto t0 = std::chrono::steady_clock::now();
    const OracleReport rep = oracle_nearest_edge(43, 10000);
    const double secs = seconds_since(t0);
    line(2, rep.pass() && rep.tie_cases >= 100 && secs < 10.0,
         fmt("nearest-edge oracle: %d trials, %d symmetric tie cases, %d failures, max err "
             "%.2e",
             rep.trials, rep.tie_cases, rep.failures, rep.max_err),
         secs);
}

// --- criterion 3: finite-difference gradient checks on every block ---
void criterion3() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(7);
    const double tol = 1e-4;
    double worst = 0.0;
    std::string worst_name = "none";
    auto keep = [&](const char* name, double err) {
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
    };

    {
        BacaParams p(8, rng);
        p.agent_h = p.agent_w = 2;
        std::vector<Tensor> xs = {Tensor::uniform({8, 4, 4}, -0.5, 0.5, rng, true),
                                  Tensor::uniform({8, 4, 4}, -0.5, 0.5, rng, true)};
        keep("baca", grad_check(
                         [&](const std::vector<Tensor>& v) {
                             return sum(baca_forward(v[0], v[1], p));
                         },
                         xs));
    }
    {
        DggfParams p(6, 4, 2, rng);
        std::vector<Tensor> xs = {Tensor::uniform({4, 5}, -0.5, 0.5, rng, true),
                                  Tensor::uniform({6, 6, 6}, -0.5, 0.5, rng, true)};
        keep("dggf", grad_check(
                         [&](const std::vector<Tensor>& v) {
                             return sum(dggf_forward(v[0], v[1], p));
                         },
                         xs));
    }
    {
        HeadParams p(8, 4, rng);
        std::vector<Tensor> xs = {Tensor::uniform({8, 8, 8}, -0.5, 0.5, rng, true)};
        keep("head", grad_check(
                         [&](const std::vector<Tensor>& v) {
                             HeadOutput o = head_forward(v[0], p);
                             return add(sum(o.heatmap), sum(o.reg));
                         },
                         xs));
    }
    {
        GridSpec grid = GridSpec::reduced();
        HeadTargets tgt =
            build_targets({Box3D{10.0, 2.0, 0.1, 4.0, 1.8, 1.5, 0.4}}, grid);
        const int hh = grid.stage_h(0), ww = grid.stage_w(0);
        std::vector<Tensor> xs = {Tensor::uniform({1, hh, ww}, -2.0, 2.0, rng, true),
                                  Tensor::uniform({10, hh, ww}, -0.5, 0.5, rng, true)};
        keep("total-loss", grad_check(
                               [&](const std::vector<Tensor>& v) {
                                   HeadOutput o{sigmoid(v[0]), v[1]};
                                   return total_loss(o, tgt, 0.25).total;
                               },
                               xs));
    }
    const double secs = seconds_since(t0);
    line(3, worst < tol && secs < 300.0,
         fmt("gradient checks baca/dggf/head/total-loss: worst %.2e (%s), tol 1e-4",
             worst, worst_name.c_str()),
         secs);
}

// --- criterion 4: attention cost accounting at (C=64, H=W=80, l=64) ---
void criterion4() {
    auto t0 = std::chrono::steady_clock::now();
    const CostReport baca = count_baca(64, 80, 80, 64);
    const CostReport mhca = count_mhca(64, 80, 80, 4);
    const double ratio_total = (double)mhca.macs_total / (double)baca.macs_total;
    const double ratio_attn = (double)mhca.macs_attention / (double)baca.macs_attention;

    // Exact affinity in L = H*W: zero second difference across three widths.
    const std::int64_t a1 = count_baca(64, 8, 8, 16).macs_total;
    const std::int64_t a2 = count_baca(64, 8, 16, 16).macs_total;
    const std::int64_t a3 = count_baca(64, 8, 24, 16).macs_total;
    const bool affine = (a3 - a2) == (a2 - a1);

    // Agent-count growth on the attention term, l=256 vs l=64.
    const double growth = (double)count_baca(64, 80, 80, 256).macs_attention /
                          (double)baca.macs_attention;
    const bool growth_ok = growth >= 3.0 && growth <= 4.2;

    // External reference figures for the same shape (counting convention
    // differs; deviations beyond 2x are reported, not failed).
    const double ref_mhca = 10.70e9, ref_baca = 46.61e6;
    const double dev_mhca = (double)mhca.macs_total / ref_mhca;
    const double dev_baca = (double)baca.macs_total / ref_baca;
    std::string note;
    if (dev_mhca > 2.0 || dev_mhca < 0.5)
        note += fmt("; note: MHCA %.2fx the reference figure", dev_mhca);
    if (dev_baca > 2.0 || dev_baca < 0.5)
        note += fmt("; note: BACA %.2fx the reference figure", dev_baca);

    const bool ok = ratio_total >= 100.0 && affine && growth_ok;
    line(4, ok,
         fmt("complexity: MHCA/BACA total ratio %.2f (attention-only %.2f) vs required >= "
             "100; affine-in-L %s; agent growth %.3f in [3,4.2] %s%s%s",
             ratio_total, ratio_attn, affine ? "exact" : "VIOLATED", growth,
             growth_ok ? "ok" : "VIOLATED", note.c_str(),
             ok ? ""
                : " -- bidirectional counting cannot reach the published ratio; see "
                  "README known limitations"),
         seconds_since(t0));
}

// --- criterion 5: build_targets -> decode round trip on 1000 boxes ---
void criterion5() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(99);
    const GridSpec grid = GridSpec::full();
    // Anchors sit up to hypot(l,w)/2 ~ 2.8m from the center; keep that inside
    // the grid so no box is rejected.
    std::uniform_real_distribution<double> ux(3.0, 48.0), uy(-22.0, 22.0), uz(-0.5, 0.5),
        ul(0.6, 5.0), uw(0.4, 2.4), uh(0.5, 2.0),
        uyaw(-std::numbers::pi, std::numbers::pi);
    double worst = 0.0;
    int decoded = 0;
    for (int i = 0; i < 1000; ++i) {
        Box3D b{ux(rng), uy(rng), uz(rng), ul(rng), uw(rng), uh(rng), uyaw(rng)};
        const HeadTargets tgt = build_targets({b}, grid, AnchorMode::kEdge);
        if (tgt.peak_cells.empty()) continue;  // anchor off-grid; box rejected
        const HeadOutput out{tgt.heatmap, tgt.reg};
        const std::vector<Detection> dets = decode(out, grid, 0.99, 1);
        if (dets.size() != 1) continue;
        ++decoded;
        const Box3D& d = dets[0].box;
        for (double e :
             {d.x - b.x, d.y - b.y, d.z - b.z, d.l - b.l, d.w - b.w, d.h - b.h,
              normalize_angle(d.yaw - b.yaw)})
            worst = std::max(worst, std::abs(e));
    }
    const double secs = seconds_since(t0);
    line(5, decoded == 1000 && worst < 1e-6 && secs < 30.0,
         fmt("round-trip decode: %d/1000 boxes, max field error %.2e", decoded, worst),
         secs);
}

// --- criterion 6: reduced-model overfit on 20 scenes ---
void criterion6() {
    auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg = ModelConfig::reduced();
    std::mt19937_64 rng(1);
    GroundingModel model(cfg, rng);
    std::vector<SceneRecord> data;
    const PromptKind kinds[] = {PromptKind::kMotion, PromptKind::kDepth,
                                PromptKind::kVelocity, PromptKind::kMixed};
    for (int i = 0; i < 20; ++i)
        data.push_back(make_record(600 + (std::uint64_t)i, 2 + i % 3, kinds[i % 4]));

    TrainConfig tc;
    tc.max_steps = 2000;
    tc.lr = 2.5e-3;
    tc.beta = 4.0;
    tc.target_accuracy = 0.9;
    tc.iou_thr = 0.5;
    const TrainResult res = train_overfit(model, data, tc);
    const double secs = seconds_since(t0);
    line(6, res.accuracy >= 0.9 && res.steps <= 2000 && secs < 600.0,
         fmt("20-scene overfit: accuracy %.2f at BEV IoU 0.5 after %d steps (loc err %.2fm, "
             "diverged %d)",
             res.accuracy, res.steps, res.loc_error, (int)res.diverged),
         secs);
}

// --- criterion 7: ablation directionality on a fixed 200-scene set ---
void criterion7() {
    auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t base_seed = 901;
    const PromptKind kinds[] = {PromptKind::kMotion, PromptKind::kDepth,
                                PromptKind::kVelocity, PromptKind::kMixed};
    std::vector<SceneRecord> data;
    for (int i = 0; i < 200; ++i)
        data.push_back(make_record(base_seed + (std::uint64_t)i, 2 + i % 3, kinds[i % 4]));

    struct Variant {
        const char* name;
        AnchorMode anchor;
        GraphMode graph;
        double depth_loc = 0.0;
        double accuracy = 0.0;
    };
    Variant runs[3] = {{"edge+dynamic", AnchorMode::kEdge, GraphMode::kDynamic},
                       {"center", AnchorMode::kCenter, GraphMode::kDynamic},
                       {"static", AnchorMode::kEdge, GraphMode::kStatic}};

    for (Variant& v : runs) {
        ModelConfig cfg = ModelConfig::reduced();
        cfg.anchor = v.anchor;
        cfg.graph = v.graph;
        std::mt19937_64 rng(17);
        GroundingModel model(cfg, rng);
        TrainConfig tc;
        tc.max_steps = 1200;
        tc.lr = 2.5e-3;
        tc.beta = 4.0;
        tc.target_accuracy = 0.0;  // fixed budget, no early stop
        train_overfit(model, data, tc);

        std::vector<GroundingSample> depth_samples, all_samples;
        for (const SceneRecord& rec : data) {
            const Box3D& gt = rec.scene.objects[rec.scene.referred.front()].box;
            const GroundingSample s = score_scene(
                model.detect(rec), gt, rec.scene.objects[rec.scene.referred.front()].cls,
                0.5);
            all_samples.push_back(s);
            if (rec.scene.kind == PromptKind::kDepth) depth_samples.push_back(s);
        }
        v.depth_loc = mean_loc_error(depth_samples);
        v.accuracy = grounding_accuracy(all_samples);
    }

    const bool edge_ok = runs[0].depth_loc <= runs[1].depth_loc;
    const bool dyn_ok = runs[0].accuracy >= runs[2].accuracy;
    const double secs = seconds_since(t0);
    const std::string what = fmt(
        "ablation direction (scene seeds %llu..%llu, init seed 17): depth-prompt loc err "
        "edge %.3fm vs center %.3fm (%s); accuracy dynamic %.3f vs static %.3f (%s)",
        (unsigned long long)base_seed, (unsigned long long)(base_seed + 199),
        runs[0].depth_loc, runs[1].depth_loc, edge_ok ? "ok" : "reversed",
        runs[0].accuracy, runs[2].accuracy, dyn_ok ? "ok" : "reversed");
    if (edge_ok && dyn_ok) {
        line(7, true, what, secs);
    } else {
        // Directional-only criterion: a reversal is recorded for
        // investigation, not treated as a hard rejection.
        line(7, false, what + " -- directional check, recorded for investigation", secs,
             /*soft=*/true);
    }
}

// --- criterion 8: metric correctness ---
void criterion8() {
    auto t0 = std::chrono::steady_clock::now();
    const OracleReport rep = oracle_ap_aos(44, 50);

    const Box3D unit{0.0, 0.0, 0.0, 2.0, 2.0, 1.0, 0.0};
    Box3D shifted = unit;
    shifted.x = 1.0;  // half horizontal overlap: inter 2, union 6
    Box3D far_box = unit;
    far_box.x = 10.0;
    const double e_same = std::abs(bev_iou(unit, unit) - 1.0);
    const double e_disj = std::abs(bev_iou(unit, far_box) - 0.0);
    const double e_half = std::abs(bev_iou(unit, shifted) - 1.0 / 3.0);
    const double iou_err = std::max({e_same, e_disj, e_half});

    const double secs = seconds_since(t0);
    line(8, rep.pass() && iou_err <= 1e-12,
         fmt("metrics: AP/AOS exhaustive agreement on %d cases (max err %.2e), analytic "
             "IoU cases max err %.2e",
             rep.trials, rep.max_err, iou_err),
         secs);
}

}  // namespace

int main(int argc, char** argv) {
    // Optional args select a subset of criteria (development convenience);
    // the registered ctest invocation passes none and runs everything.
    bool run[9];
    for (int i = 1; i <= 8; ++i) run[i] = argc < 2;
    for (int a = 1; a < argc; ++a) {
        const int c = std::atoi(argv[a]);
        if (c >= 1 && c <= 8) run[c] = true;
    }
    if (run[1]) criterion1();
    if (run[2]) criterion2();
    if (run[3]) criterion3();
    if (run[4]) criterion4();
    if (run[5]) criterion5();
    if (run[6]) criterion6();
    if (run[7]) criterion7();
    if (run[8]) criterion8();
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all gating criteria passed\n");
    return 0;
}
