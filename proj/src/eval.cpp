// SPDX-License-Identifier: MIT

#include "lrf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace lrf {

std::vector<MatchEntry> match_greedy(const std::vector<Detection>& preds,
                                     const std::vector<Box3D>& gts, double iou_thr) {
    std::vector<int> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return preds[a].score > preds[b].score; });

    std::vector<bool> taken(gts.size(), false);
    std::vector<MatchEntry> out;
    for (int pi : order) {
        MatchEntry e;
        e.pred = pi;
        int best = -1;
        double best_iou = 0.0;
        for (int gi = 0; gi < (int)gts.size(); ++gi) {
            if (taken[gi]) continue;
            const double iou = bev_iou(preds[pi].box, gts[gi]);
            if (iou > best_iou) {
                best_iou = iou;
                best = gi;
            }
        }
        if (best >= 0 && best_iou >= iou_thr) {
            taken[best] = true;
            e.gt = best;
            e.iou = best_iou;
            e.orient_sim = 0.5 * (1.0 + std::cos(preds[pi].box.yaw - gts[best].yaw));
            e.matched = true;
        }
        out.push_back(e);
    }
    return out;
}

ApAos ap_aos(const std::vector<Detection>& preds, const std::vector<Box3D>& gts,
             double iou_thr) {
    ApAos r;
    if (gts.empty()) return r;  // undefined
    r.defined = true;
    if (preds.empty()) return r;

    const std::vector<MatchEntry> matches = match_greedy(preds, gts, iou_thr);
    const int n = (int)matches.size();
    std::vector<double> prec(n), rec(n), osim(n);
    int tp = 0;
    double os_sum = 0.0;
    for (int k = 0; k < n; ++k) {
        if (matches[k].matched) {
            ++tp;
            os_sum += matches[k].orient_sim;
        }
        prec[k] = (double)tp / (k + 1);
        osim[k] = os_sum / (k + 1);
        rec[k] = (double)tp / gts.size();
    }
    // Envelope interpolation: carry the best value seen at this recall or
    // beyond back to every earlier point.
    for (int k = n - 2; k >= 0; --k) {
        prec[k] = std::max(prec[k], prec[k + 1]);
        osim[k] = std::max(osim[k], osim[k + 1]);
    }
    double prev_rec = 0.0;
    for (int k = 0; k < n; ++k) {
        r.ap += (rec[k] - prev_rec) * prec[k];
        r.aos += (rec[k] - prev_rec) * osim[k];
        prev_rec = rec[k];
    }
    return r;
}

GroundingSample score_scene(const std::vector<Detection>& preds, const Box3D& gt,
                            ObjectClass cls, double iou_thr) {
    GroundingSample s;
    s.cls = cls;
    const BoxGeometry g = nearest_edge(gt);
    s.range = std::hypot(g.anchor.x, g.anchor.y);
    if (preds.empty()) return s;
    const Detection* top = &preds[0];
    for (const Detection& d : preds)
        if (d.score > top->score) top = &d;
    s.correct = bev_iou(top->box, gt) >= iou_thr;
    s.loc_error = std::hypot(top->box.x - gt.x, top->box.y - gt.y);
    return s;
}

int depth_bucket(double range) {
    if (range < 0.0) range = 0.0;
    return std::min(5, (int)(range / 10.0));
}

std::map<std::pair<int, int>, BucketStat> depth_buckets(
    const std::vector<GroundingSample>& samples) {
    std::map<std::pair<int, int>, BucketStat> out;
    for (const GroundingSample& s : samples) {
        BucketStat& b = out[{(int)s.cls, depth_bucket(s.range)}];
        ++b.total;
        if (s.correct) ++b.correct;
    }
    return out;
}

double grounding_accuracy(const std::vector<GroundingSample>& samples) {
    if (samples.empty()) return 0.0;
    int ok = 0;
    for (const GroundingSample& s : samples) ok += s.correct ? 1 : 0;
    return (double)ok / samples.size();
}

double mean_loc_error(const std::vector<GroundingSample>& samples) {
    double sum = 0.0;
    int n = 0;
    for (const GroundingSample& s : samples)
        if (!std::isnan(s.loc_error)) {
            sum += s.loc_error;
            ++n;
        }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

std::string format_buckets(const std::map<std::pair<int, int>, BucketStat>& buckets) {
    std::string out = "class,bucket,total,accuracy\n";
    for (const auto& [key, stat] : buckets) {
        char range[32];
        if (key.second < 5)
            std::snprintf(range, sizeof(range), "%d-%d", key.second * 10,
                          key.second * 10 + 10);
        else
            std::snprintf(range, sizeof(range), "50+");
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.4f\n",
                      class_name((ObjectClass)key.first), range, stat.total,
                      stat.accuracy());
        out += buf;
    }
    return out;
}

}  // namespace lrf
