#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nucsel/mask.hpp"

namespace nucsel {

/// How a ground-truth nucleus picks its prediction in AJI.
enum class MatchCriterion {
    Jaccard,       // maximum intersection-over-union (standard AJI)
    Intersection,  // maximum intersection area
};

MatchCriterion parse_match_criterion(const std::string& name);  // jaccard | intersection

struct GroundTruthMatch {
    std::uint32_t gt_id = 0;
    std::optional<std::uint32_t> pred_id;  // empty when nothing intersects
    std::size_t intersection = 0;
    std::size_t union_area = 0;            // |T_i| when unmatched
};

struct MatchResult {
    std::vector<GroundTruthMatch> matches;          // ascending gt id
    std::vector<std::uint32_t> unmatched_predictions;  // ascending id
    std::size_t numerator = 0;
    std::size_t denominator = 0;                    // includes unmatched prediction areas
};

/// Greedy AJI matching. Ground truths are visited in ascending id; each takes
/// the best not-yet-used intersecting prediction (ties: lowest id).
MatchResult aji_match(const InstanceMask& gt, const InstanceMask& pred,
                      MatchCriterion criterion = MatchCriterion::Jaccard);

/// Aggregated Jaccard Index in [0, 1]. Both maps empty gives 1 by convention.
double aji(const InstanceMask& gt, const InstanceMask& pred, MatchCriterion criterion = MatchCriterion::Jaccard);

/// 2|X & Y| / (|X| + |Y|). Both empty gives 1 by convention.
double dice(const BinaryMap& gt, const BinaryMap& pred);
double dice(const InstanceMask& gt, const InstanceMask& pred);

struct TTestResult {
    double t = 0;
    double p = 1;              // two-sided
    std::size_t n = 0;
    double mean_difference = 0;
    bool degenerate = false;   // differences have zero variance
};

/// Paired Student t-test on d = a - b with n - 1 degrees of freedom.
/// Zero-variance differences give p = 0 (nonzero mean) or p = 1 (zero mean)
/// with the degenerate flag set.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

}  // namespace nucsel
