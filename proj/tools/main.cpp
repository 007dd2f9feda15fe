// SPDX-License-Identifier: MIT
//
// Command-line front end: dataset generation, oracle and gradient
// verification, cost accounting, desk-scale training and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrf/baca.hpp"
#include "lrf/complexity.hpp"
#include "lrf/dggf.hpp"
#include "lrf/eval.hpp"
#include "lrf/head.hpp"
#include "lrf/model.hpp"
#include "lrf/oracles.hpp"
#include "lrf/scenes.hpp"
#include "lrf/trainer.hpp"
#include "lrf/training.hpp"

namespace {

using namespace lrf;

PromptKind parse_kind(const std::string& s) {
    if (s == "motion") return PromptKind::kMotion;
    if (s == "depth") return PromptKind::kDepth;
    if (s == "velocity") return PromptKind::kVelocity;
    if (s == "mixed") return PromptKind::kMixed;
    throw CLI::ValidationError("kind", "unknown kind '" + s + "'");
}

std::vector<SceneRecord> gen_records(std::uint64_t seed, int count, int objects,
                                     const std::string& kind) {
    const PromptKind cycle[] = {PromptKind::kMotion, PromptKind::kDepth,
                                PromptKind::kVelocity, PromptKind::kMixed};
    std::vector<SceneRecord> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const PromptKind k = kind == "all" ? cycle[i % 4] : parse_kind(kind);
        out.push_back(make_record(seed + (std::uint64_t)i, objects, k));
    }
    return out;
}

void apply_ablations(ModelConfig& cfg, const std::string& pool, const std::string& graph,
                     const std::string& anchor) {
    cfg.pool = pool == "avg" ? GatePool::kAvg : GatePool::kMax;
    cfg.graph = graph == "static" ? GraphMode::kStatic : GraphMode::kDynamic;
    cfg.anchor = anchor == "center" ? AnchorMode::kCenter : AnchorMode::kEdge;
}

int print_report(const char* name, const OracleReport& rep) {
    std::printf("%-22s trials=%-6d ties=%-5d failures=%-4d max_err=%.3e  %s\n", name,
                rep.trials, rep.tie_cases, rep.failures, rep.max_err,
                rep.pass() ? "ok" : rep.detail.c_str());
    return rep.pass() ? 0 : 1;
}

int cmd_oracle_check(std::uint64_t seed, int dyn_trials, int edge_trials, int ap_trials) {
    int bad = 0;
    bad += print_report("dynamic-graph-conv", oracle_dyn_conv(seed, dyn_trials));
    bad += print_report("nearest-edge-anchor", oracle_nearest_edge(seed + 1, edge_trials));
    bad += print_report("ap-aos", oracle_ap_aos(seed + 2, ap_trials));
    return bad ? 1 : 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double tol = 1e-4;
    int bad = 0;
    auto report = [&](const char* name, double err) {
        std::printf("%-12s max_rel_err=%.3e  %s\n", name, err, err < tol ? "ok" : "FAIL");
        if (!(err < tol)) ++bad;
    };

    {
        BacaParams p(8, rng);
        p.agent_h = p.agent_w = 2;
        std::vector<Tensor> xs = {Tensor::uniform({8, 4, 4}, -0.5, 0.5, rng, true),
                                  Tensor::uniform({8, 4, 4}, -0.5, 0.5, rng, true)};
        report("baca", grad_check(
                           [&](const std::vector<Tensor>& v) {
                               return sum(baca_forward(v[0], v[1], p));
                           },
                           xs));
    }
    {
        DggfParams p(6, 4, 2, rng);
        std::vector<Tensor> xs = {Tensor::uniform({4, 5}, -0.5, 0.5, rng, true),
                                  Tensor::uniform({6, 6, 6}, -0.5, 0.5, rng, true)};
        report("dggf", grad_check(
                           [&](const std::vector<Tensor>& v) {
                               return sum(dggf_forward(v[0], v[1], p));
                           },
                           xs));
    }
    {
        HeadParams p(8, 4, rng);
        std::vector<Tensor> xs = {Tensor::uniform({8, 8, 8}, -0.5, 0.5, rng, true)};
        report("head", grad_check(
                           [&](const std::vector<Tensor>& v) {
                               HeadOutput o = head_forward(v[0], p);
                               return add(sum(o.heatmap), sum(o.reg));
                           },
                           xs));
    }
    {
        GridSpec grid = GridSpec::reduced();
        std::vector<Box3D> boxes = {Box3D{10.0, 2.0, 0.1, 4.0, 1.8, 1.5, 0.4}};
        HeadTargets tgt = build_targets(boxes, grid);
        const int hh = grid.stage_h(0), ww = grid.stage_w(0);
        std::vector<Tensor> xs = {Tensor::uniform({1, hh, ww}, -2.0, 2.0, rng, true),
                                  Tensor::uniform({10, hh, ww}, -0.5, 0.5, rng, true)};
        report("total-loss", grad_check(
                                 [&](const std::vector<Tensor>& v) {
                                     HeadOutput o{sigmoid(v[0]), v[1]};
                                     return total_loss(o, tgt, 0.25).total;
                                 },
                                 xs));
    }
    return bad ? 1 : 0;
}

int cmd_bench(const std::vector<int>& stages, const std::vector<int>& shape_ovr, int agent,
              int heads, int repeats, bool wallclock) {
    struct Shape {
        int c, h, w;
    };
    std::vector<Shape> shapes;
    for (int s : stages) {
        if (s == 3) shapes.push_back({64, 80, 80});
        else if (s == 4) shapes.push_back({128, 40, 40});
        else if (s == 5) shapes.push_back({256, 20, 20});
        else throw CLI::ValidationError("stage", "stage must be 3, 4 or 5");
    }
    if (!shape_ovr.empty()) {
        if (shape_ovr.size() != 3)
            throw CLI::ValidationError("shape", "--shape needs C H W");
        shapes.push_back({shape_ovr[0], shape_ovr[1], shape_ovr[2]});
    }
    if (shapes.empty()) shapes = {{64, 80, 80}, {128, 40, 40}, {256, 20, 20}};

    std::vector<CostReport> rows;
    for (const Shape& s : shapes) {
        rows.push_back(count_baca(s.c, s.h, s.w, agent * agent));
        rows.push_back(count_mhca(s.c, s.h, s.w, heads));
        rows.push_back(count_mhlca(s.c, s.h, s.w, heads));
        if (wallclock) {
            rows.push_back(bench_wallclock("baca", s.c, s.h, s.w, agent, repeats));
            rows.push_back(bench_wallclock("mhca", s.c, s.h, s.w, agent, repeats));
            rows.push_back(bench_wallclock("mhlca", s.c, s.h, s.w, agent, repeats));
        }
    }
    std::printf("%s", format_cost_table(rows).c_str());
    std::printf("\n%s\n", kCostCsvHeader);
    for (const CostReport& r : rows) std::printf("%s\n", r.csv_row().c_str());

    const Shape& s0 = shapes.front();
    const CostReport b = count_baca(s0.c, s0.h, s0.w, agent * agent);
    const CostReport m = count_mhca(s0.c, s0.h, s0.w, heads);
    std::printf("\nfirst shape (%d,%d,%d): mhca/baca total %.4f, attention-only %.4f\n",
                s0.c, s0.h, s0.w, (double)m.macs_total / (double)b.macs_total,
                (double)m.macs_attention / (double)b.macs_attention);
    return 0;
}

struct RunFlags {
    std::string data, out, config = "reduced";
    std::string pool = "max", graph = "dynamic", anchor = "edge", kind = "all";
    int gen = 0, objects = 3, steps = 2000;
    std::uint64_t seed = 1;
    double lr = 2.5e-3, beta = 4.0, wd = 0.0, iou = 0.5, target = 0.9;
    bool sgd = false;
};

std::vector<SceneRecord> load_or_gen(const RunFlags& f) {
    if (!f.data.empty()) return read_dataset(f.data);
    if (f.gen <= 0)
        throw CLI::ValidationError("data", "provide --data FILE or --gen N");
    return gen_records(f.seed, f.gen, f.objects, f.kind);
}

void print_metrics(std::FILE* fp, const GroundingModel& model,
                   const std::vector<SceneRecord>& data, double iou_thr) {
    std::vector<GroundingSample> samples = evaluate(model, data, iou_thr);
    double ap_sum = 0.0, aos_sum = 0.0;
    int ap_n = 0;
    for (const SceneRecord& rec : data) {
        std::vector<Box3D> gt = {rec.scene.objects[rec.scene.referred.front()].box};
        const ApAos pr = ap_aos(model.detect(rec), gt, iou_thr);
        if (pr.defined) {
            ap_sum += pr.ap;
            aos_sum += pr.aos;
            ++ap_n;
        }
    }
    std::fprintf(fp, "scenes              %zu\n", data.size());
    std::fprintf(fp, "grounding_accuracy  %.4f  (IoU >= %.2f)\n",
                 grounding_accuracy(samples), iou_thr);
    std::fprintf(fp, "mean_loc_error_m    %.4f\n", mean_loc_error(samples));
    std::fprintf(fp, "mean_ap             %.4f\n", ap_n ? ap_sum / ap_n : 0.0);
    std::fprintf(fp, "mean_aos            %.4f\n", ap_n ? aos_sum / ap_n : 0.0);
    std::fprintf(fp, "\n%s", format_buckets(depth_buckets(samples)).c_str());
}

int cmd_train(const RunFlags& f) {
    std::vector<SceneRecord> data = load_or_gen(f);
    ModelConfig cfg = f.config == "full" ? ModelConfig::full() : ModelConfig::reduced();
    apply_ablations(cfg, f.pool, f.graph, f.anchor);
    std::mt19937_64 rng(f.seed);
    GroundingModel model(cfg, rng);
    std::printf("config=%s params=%lld scenes=%zu steps<=%d lr=%g beta=%g %s\n",
                f.config.c_str(), (long long)model.param_count(), data.size(), f.steps,
                f.lr, f.beta, f.sgd ? "sgd" : "adamw");

    TrainConfig tc;
    tc.max_steps = f.steps;
    tc.lr = f.lr;
    tc.beta = f.beta;
    tc.adamw = !f.sgd;
    tc.weight_decay = f.wd;
    tc.iou_thr = f.iou;
    tc.target_accuracy = f.target;
    TrainResult res = train_overfit(model, data, tc);
    std::printf("steps=%d accuracy=%.4f loc_error=%.4f diverged=%d\n", res.steps,
                res.accuracy, res.loc_error, (int)res.diverged);

    if (!f.out.empty()) {
        std::filesystem::create_directories(f.out);
        write_curve(res.curve, f.out + "/curve.csv");
        save_params(f.out + "/params.bin", model.params());
        std::FILE* fp = std::fopen((f.out + "/metrics.txt").c_str(), "w");
        if (!fp) throw std::runtime_error("cannot write " + f.out + "/metrics.txt");
        print_metrics(fp, model, data, f.iou);
        std::fclose(fp);
        std::printf("wrote %s/{curve.csv,params.bin,metrics.txt}\n", f.out.c_str());
    }
    return res.diverged ? 1 : 0;
}

int cmd_eval(const RunFlags& f, const std::string& params_path) {
    std::vector<SceneRecord> data = load_or_gen(f);
    ModelConfig cfg = f.config == "full" ? ModelConfig::full() : ModelConfig::reduced();
    apply_ablations(cfg, f.pool, f.graph, f.anchor);
    std::mt19937_64 rng(f.seed);
    GroundingModel model(cfg, rng);
    if (!params_path.empty()) load_params(params_path, model.params());
    print_metrics(stdout, model, data, f.iou);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiDAR-radar visual grounding: data, verification, training, metrics"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "write a JSONL scene dataset");
    std::uint64_t g_seed = 1;
    int g_count = 50, g_objects = 3;
    std::string g_kind = "all", g_out;
    gen->add_option("--seed", g_seed, "base scene seed");
    gen->add_option("--count", g_count, "number of scenes")->check(CLI::PositiveNumber);
    gen->add_option("--objects", g_objects, "objects per scene")
        ->check(CLI::Range(1, 8));
    gen->add_option("--kind", g_kind, "motion|depth|velocity|mixed|all");
    gen->add_option("--out", g_out, "output JSONL path")->required();

    // oracle-check
    auto* ora = app.add_subcommand("oracle-check", "run the independent oracles");
    std::uint64_t o_seed = 42;
    int o_dyn = 200, o_edge = 10000, o_ap = 50;
    ora->add_option("--seed", o_seed, "oracle seed");
    ora->add_option("--dyn-trials", o_dyn, "dynamic-graph trials");
    ora->add_option("--edge-trials", o_edge, "nearest-edge trials");
    ora->add_option("--ap-trials", o_ap, "AP/AOS trials");

    // gradcheck
    auto* grd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    std::uint64_t d_seed = 7;
    grd->add_option("--seed", d_seed, "init seed");

    // bench
    auto* ben = app.add_subcommand("bench", "attention cost accounting");
    std::vector<int> b_stages, b_shape;
    int b_agent = 8, b_heads = 4, b_repeats = 20;
    bool b_wall = false;
    ben->add_option("--stage", b_stages, "pyramid stage shape preset (3, 4 or 5)");
    ben->add_option("--shape", b_shape, "explicit C H W shape")->expected(3);
    ben->add_option("--agent", b_agent, "agent grid side (l = side^2)");
    ben->add_option("--heads", b_heads, "heads for the dense baselines");
    ben->add_option("--repeats", b_repeats, "wall-clock repeats");
    ben->add_flag("--wallclock", b_wall, "also measure wall-clock medians");

    auto add_run_flags = [](CLI::App* cmd, RunFlags& f, bool training) {
        cmd->add_option("--data", f.data, "JSONL dataset path");
        cmd->add_option("--gen", f.gen, "generate N scenes instead of --data");
        cmd->add_option("--objects", f.objects, "objects per generated scene");
        cmd->add_option("--kind", f.kind, "generated prompt kind or 'all'");
        cmd->add_option("--config", f.config, "full|reduced");
        cmd->add_option("--seed", f.seed, "model init / generation seed");
        cmd->add_option("--iou", f.iou, "grounding IoU threshold");
        cmd->add_option("--gate-pool", f.pool, "max|avg text pooling");
        cmd->add_option("--graph", f.graph, "dynamic|static graph masks");
        cmd->add_option("--anchor", f.anchor, "edge|center target anchor");
        if (training) {
            cmd->add_option("--steps", f.steps, "step budget");
            cmd->add_option("--lr", f.lr, "peak learning rate");
            cmd->add_option("--beta", f.beta, "regression loss weight");
            cmd->add_option("--wd", f.wd, "decoupled weight decay");
            cmd->add_option("--target-acc", f.target, "early-stop accuracy, <=0 off");
            cmd->add_flag("--sgd", f.sgd, "plain SGD instead of AdamW");
            cmd->add_option("--out", f.out, "output directory");
        }
    };

    auto* trn = app.add_subcommand("train", "overfit a model on a small set");
    RunFlags t_flags;
    add_run_flags(trn, t_flags, true);

    auto* evl = app.add_subcommand("eval", "grounding metrics for saved parameters");
    RunFlags e_flags;
    std::string e_params;
    add_run_flags(evl, e_flags, false);
    evl->add_option("--params", e_params, "parameter blob from train --out");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) {
            std::vector<SceneRecord> recs = gen_records(g_seed, g_count, g_objects, g_kind);
            write_dataset(recs, g_out);
            std::printf("wrote %d scenes to %s\n", g_count, g_out.c_str());
            return 0;
        }
        if (ora->parsed()) return cmd_oracle_check(o_seed, o_dyn, o_edge, o_ap);
        if (grd->parsed()) return cmd_gradcheck(d_seed);
        if (ben->parsed())
            return cmd_bench(b_stages, b_shape, b_agent, b_heads, b_repeats, b_wall);
        if (trn->parsed()) return cmd_train(t_flags);
        if (evl->parsed()) return cmd_eval(e_flags, e_params);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
