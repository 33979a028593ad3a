#include "nucsel/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace nucsel {

MatchCriterion parse_match_criterion(const std::string& name) {
    if (name == "jaccard") return MatchCriterion::Jaccard;
    if (name == "intersection") return MatchCriterion::Intersection;
    throw Error("unknown match criterion '" + name + "' (expected jaccard or intersection)");
}

namespace {

void require_same_size(const InstanceMask& a, const InstanceMask& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error("dimension mismatch: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
}

}  // namespace

MatchResult aji_match(const InstanceMask& gt, const InstanceMask& pred, MatchCriterion criterion) {
    require_same_size(gt, pred);

    std::map<std::uint32_t, std::size_t> gt_area, pred_area;
    std::map<std::uint32_t, std::map<std::uint32_t, std::size_t>> overlap;  // gt -> pred -> pixels
    const auto& g = gt.labels();
    const auto& p = pred.labels();
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const std::uint32_t gi = g.data()[i], pi = p.data()[i];
        if (gi) ++gt_area[gi];
        if (pi) ++pred_area[pi];
        if (gi && pi) ++overlap[gi][pi];
    }

    MatchResult out;
    std::map<std::uint32_t, bool> used;
    for (const auto& [gid, garea] : gt_area) {
        GroundTruthMatch m;
        m.gt_id = gid;
        m.union_area = garea;
        std::size_t best_inter = 0, best_union = 1;
        const auto row = overlap.find(gid);
        if (row != overlap.end()) {
            for (const auto& [pid, inter] : row->second) {  // ascending pred id, so strict > keeps the lowest on ties
                if (used[pid]) continue;
                const std::size_t uni = garea + pred_area[pid] - inter;
                bool better;
                if (!m.pred_id) {
                    better = true;
                } else if (criterion == MatchCriterion::Jaccard) {
                    better = static_cast<unsigned __int128>(inter) * best_union >
                             static_cast<unsigned __int128>(best_inter) * uni;
                } else {
                    better = inter > best_inter;
                }
                if (better) {
                    m.pred_id = pid;
                    best_inter = inter;
                    best_union = uni;
                }
            }
        }
        if (m.pred_id) {
            used[*m.pred_id] = true;
            m.intersection = best_inter;
            m.union_area = best_union;
        }
        out.numerator += m.intersection;
        out.denominator += m.union_area;
        out.matches.push_back(m);
    }
    for (const auto& [pid, area] : pred_area) {
        if (used[pid]) continue;
        out.unmatched_predictions.push_back(pid);
        out.denominator += area;
    }
    return out;
}

double aji(const InstanceMask& gt, const InstanceMask& pred, MatchCriterion criterion) {
    const MatchResult m = aji_match(gt, pred, criterion);
    if (m.denominator == 0) return 1.0;  // both maps empty
    return static_cast<double>(m.numerator) / static_cast<double>(m.denominator);
}

double dice(const BinaryMap& gt, const BinaryMap& pred) {
    if (gt.rows() != pred.rows() || gt.cols() != pred.cols()) throw Error("dice: dimension mismatch");
    const auto inter = static_cast<double>((gt && pred).count());
    const auto total = static_cast<double>(gt.count() + pred.count());
    if (total == 0) return 1.0;
    return 2.0 * inter / total;
}

double dice(const InstanceMask& gt, const InstanceMask& pred) {
    require_same_size(gt, pred);
    return dice(gt.foreground(), pred.foreground());
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("paired_ttest: samples differ in length");
    if (a.size() < 2) throw Error("paired_ttest: need at least 2 pairs");

    TTestResult r;
    r.n = a.size();
    const double n = static_cast<double>(r.n);
    std::vector<double> d(r.n);
    for (std::size_t i = 0; i < r.n; ++i) d[i] = a[i] - b[i];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double ss = 0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1));
    r.mean_difference = mean;

    if (sd == 0) {
        r.degenerate = true;
        if (mean == 0) {
            r.t = 0;
            r.p = 1;
        } else {
            r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
            r.p = 0;
        }
        return r;
    }

    r.t = mean / (sd / std::sqrt(n));
    const boost::math::students_t dist(n - 1);
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    return r;
}

}  // namespace nucsel
