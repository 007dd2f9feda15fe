// SPDX-License-Identifier: MIT
//
// Grounding metrics: rotated-rectangle/3D IoU (re-exported from geometry),
// greedy score-descending one-to-one matching, all-point AP with the
// orientation-weighted AOS variant, depth-bucketed accuracy over the
// half-open ranges [0,10), [10,20), ..., [50,inf), and per-scene grounding
// scores (top-1 hit rate and localization error).

#pragma once

#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lrf/geometry.hpp"
#include "lrf/head.hpp"
#include "lrf/scenes.hpp"

namespace lrf {

struct MatchEntry {
    int pred = -1;  // index into the score-sorted prediction list
    int gt = -1;    // matched ground-truth index, -1 when unmatched
    double iou = 0.0;
    double orient_sim = 0.0;  // (1 + cos dtheta) / 2, matches only
    bool matched = false;
};

// Predictions visit ground truth in descending score order; each takes the
// highest-IoU unmatched box when that IoU clears the threshold.
std::vector<MatchEntry> match_greedy(const std::vector<Detection>& preds,
                                     const std::vector<Box3D>& gts, double iou_thr);

struct ApAos {
    bool defined = false;  // false when the ground-truth set is empty
    double ap = 0.0;
    double aos = 0.0;
};

// All-point precision/recall integration with envelope interpolation; AOS
// replaces precision by the orientation-weighted variant.
ApAos ap_aos(const std::vector<Detection>& preds, const std::vector<Box3D>& gts,
             double iou_thr);

// One grounding trial: the top-scoring prediction against the referred box.
struct GroundingSample {
    ObjectClass cls = ObjectClass::kCar;
    double range = 0.0;     // ground-truth anchor range from the sensor
    bool correct = false;   // top-1 BEV IoU cleared the threshold
    double loc_error = std::numeric_limits<double>::quiet_NaN();  // NaN: no prediction
};

GroundingSample score_scene(const std::vector<Detection>& preds, const Box3D& gt,
                            ObjectClass cls, double iou_thr);

int depth_bucket(double range);  // 0..5; ranges >= 50 land in 5

struct BucketStat {
    int total = 0;
    int correct = 0;
    double accuracy() const { return total ? (double)correct / total : 0.0; }
};

// Keyed by (class, bucket); empty buckets are absent, not zero.
std::map<std::pair<int, int>, BucketStat> depth_buckets(
    const std::vector<GroundingSample>& samples);

double grounding_accuracy(const std::vector<GroundingSample>& samples);
// Mean top-1 center distance over samples that produced a prediction.
double mean_loc_error(const std::vector<GroundingSample>& samples);

// "class,bucket,total,accuracy" rows, bucket rendered as its range.
std::string format_buckets(const std::map<std::pair<int, int>, BucketStat>& buckets);

}  // namespace lrf
