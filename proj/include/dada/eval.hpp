#pragma once

// ROC/AUC and fixed-threshold rates over slot-level scores.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dada/detector.hpp"
#include "dada/error.hpp"
#include "dada/sim.hpp"

namespace dada {

/// Detection statistic |r - mu| / sigma with its ground-truth label. The
/// score may be +inf for zero-sigma slots; those form the top tie class.
struct ScoredPoint {
    double score = 0.0;
    bool label = false;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    std::uint64_t false_positives = 0;
    std::uint64_t true_positives = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) first, (1,1) last
    std::uint64_t positives = 0;
    std::uint64_t negatives = 0;
};

namespace detail {

inline void count_classes(std::span<const ScoredPoint> points, std::uint64_t& pos, std::uint64_t& neg) {
    pos = 0;
    neg = 0;
    for (const auto& p : points) {
        require(!std::isnan(p.score), "scored point has NaN score");
        (p.label ? pos : neg) += 1;
    }
    require(pos > 0, "roc: no positive-class points");
    require(neg > 0, "roc: no negative-class points");
}

}  // namespace detail

/// Sweeps the threshold down through the distinct scores; tied scores move
/// together as one step.
inline RocCurve roc(std::span<const ScoredPoint> points) {
    RocCurve curve;
    detail::count_classes(points, curve.positives, curve.negatives);

    std::vector<ScoredPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), [](const ScoredPoint& a, const ScoredPoint& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.label < b.label;
    });

    const auto P = static_cast<double>(curve.positives);
    const auto N = static_cast<double>(curve.negatives);
    curve.points.push_back({0.0, 0.0, 0, 0});
    std::uint64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double s = sorted[i].score;
        for (; i < sorted.size() && sorted[i].score == s; ++i) (sorted[i].label ? tp : fp) += 1;
        curve.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, fp, tp});
    }
    return curve;
}

/// Trapezoidal area, accumulated on integer counts so it equals the
/// pairwise probability (ties credited 1/2).
inline double auc(const RocCurve& curve) {
    require(curve.points.size() >= 2 && curve.positives > 0 && curve.negatives > 0, "auc: invalid curve");
    // twice the area in units of (1 negative) x (1 positive)
    std::uint64_t twice_area = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        twice_area += (b.false_positives - a.false_positives) * (a.true_positives + b.true_positives);
    }
    return static_cast<double>(twice_area) /
           (2.0 * static_cast<double>(curve.positives) * static_cast<double>(curve.negatives));
}

inline double auc(std::span<const ScoredPoint> points) { return auc(roc(points)); }

struct Rates {
    double tpr = 0.0;
    double fpr = 0.0;
};

/// Decision score > p is positive, matching the detector's boundary.
inline Rates tpr_fpr_at(std::span<const ScoredPoint> points, const DetectionThreshold& threshold) {
    std::uint64_t pos = 0, neg = 0;
    detail::count_classes(points, pos, neg);
    std::uint64_t tp = 0, fp = 0;
    for (const auto& p : points) {
        if (!exceeds(p.score, threshold)) continue;
        (p.label ? tp : fp) += 1;
    }
    return {static_cast<double>(tp) / static_cast<double>(pos), static_cast<double>(fp) / static_cast<double>(neg)};
}

inline std::vector<ScoredPoint> scored_points(const SimResult& result) {
    std::vector<ScoredPoint> pts(result.score.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {result.score[i], result.label[i] != 0};
    return pts;
}

inline bool has_both_classes(const SimResult& result) {
    bool pos = false, neg = false;
    for (auto l : result.label) (l ? pos : neg) = true;
    return pos && neg;
}

/// Mean over slots of the per-slot reconstruction RMSE, restricted to eval
/// days before the first model update took effect.
inline double pre_update_slot_rmse(const SimResult& result) {
    int last_day = result.total_days;
    if (!result.retrains.empty()) last_day = std::min(last_day, result.retrains.front().effective_day - 1);
    const int days = last_day - result.bootstrap_days;
    require(days >= 1, "pre_update_slot_rmse: no eval days before the first update");
    double total = 0.0;
    for (int m = 0; m < result.readings_per_day; ++m) {
        double sq = 0.0;
        for (int s = 0; s < result.sensors; ++s)
            for (int e = 0; e < days; ++e) {
                const auto i = result.index(s, e, m);
                const double d = result.reading[i] - result.reconstruction[i];
                sq += d * d;
            }
        total += std::sqrt(sq / static_cast<double>(result.sensors * days));
    }
    return total / static_cast<double>(result.readings_per_day);
}

}  // namespace dada
