// SPDX-License-Identifier: MIT
//
// Independent exhaustive re-implementations of the decision procedures the
// library computes in vectorized or closed form: quadrant statistics +
// connectivity masks + max-relative accumulation (plain scalar loops),
// nearest-edge selection (re-derived segment projection with tie cases) and
// the all-point AP/AOS integration (prefix re-matching). Used by the CLI
// verification command and the acceptance suite.

#pragma once

#include <cstdint>
#include <string>

namespace lrf {

struct OracleReport {
    int trials = 0;
    int tie_cases = 0;  // symmetric anchor ties exercised (nearest-edge only)
    int failures = 0;
    double max_err = 0.0;  // worst value discrepancy across all comparisons
    std::string detail;    // first failure, if any

    bool pass() const { return trials > 0 && failures == 0; }
};

// Random maps (C in {1,2,4}, H=W in {8,12,16}, K in {2,4}): masks must match
// bitwise and the accumulated X_final to 1e-12.
OracleReport oracle_dyn_conv(std::uint64_t seed, int trials);

// Random boxes and sensors; every 50th trial is an exactly symmetric
// axis-aligned case that forces the midpoint tie rule.
OracleReport oracle_nearest_edge(std::uint64_t seed, int trials);

// Random small prediction/ground-truth sets at thresholds 0.25 and 0.5.
OracleReport oracle_ap_aos(std::uint64_t seed, int trials);

}  // namespace lrf
