#pragma once

// Residuals, pooled per-slot residual statistics and the p-sigma decision rule.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/error.hpp"

namespace dada {

/// r = x - x_hat, one entry per slot.
using ResidualVector = Vector;

/// One flag per slot; 1 marks an anomalous reading.
using AnomalyFlags = std::vector<std::uint8_t>;

struct ResidualStats {
    Vector mu;
    Vector sigma;  // standard deviation, not variance

    std::size_t slots() const { return static_cast<std::size_t>(mu.size()); }

    void validate(std::size_t m) const {
        require(static_cast<std::size_t>(mu.size()) == m && static_cast<std::size_t>(sigma.size()) == m,
                "ResidualStats: length does not match M=" + std::to_string(m));
        require((sigma.array() >= 0.0).all() && sigma.allFinite() && mu.allFinite(),
                "ResidualStats: sigma must be finite and >= 0");
    }

    friend bool operator==(const ResidualStats& a, const ResidualStats& b) {
        return a.mu.size() == b.mu.size() && a.sigma.size() == b.sigma.size() && a.mu == b.mu &&
               a.sigma == b.sigma;
    }
};

struct DetectionThreshold {
    double p = 2.0;

    void validate() const { require(std::isfinite(p) && p > 0.0, "DetectionThreshold: p must be > 0"); }
};

inline ResidualVector residual(const Vector& x, const Vector& x_hat) {
    require(x.size() == x_hat.size(), "residual: length mismatch (" + std::to_string(x.size()) + " vs " +
                                          std::to_string(x_hat.size()) + ")");
    return x - x_hat;
}

/// Normalized deviation |r - mu| / sigma. With sigma == 0 it is +inf when r != mu, else 0.
inline double deviation_score(double r, double mu, double sigma) noexcept {
    const double dev = std::fabs(r - mu);
    if (sigma > 0.0) return dev / sigma;
    return dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Flag iff the deviation score exceeds p. Equality is not anomalous.
inline bool exceeds(double score, const DetectionThreshold& threshold) noexcept { return score > threshold.p; }

inline AnomalyFlags detect(const ResidualVector& r, const ResidualStats& stats, const DetectionThreshold& threshold) {
    require(r.size() == stats.mu.size() && r.size() == stats.sigma.size(), "detect: length mismatch");
    AnomalyFlags flags(static_cast<std::size_t>(r.size()), 0);
    for (Eigen::Index m = 0; m < r.size(); ++m) {
        flags[static_cast<std::size_t>(m)] =
            exceeds(deviation_score(r(m), stats.mu(m), stats.sigma(m)), threshold) ? 1 : 0;
    }
    return flags;
}

/// Per-slot mean and population standard deviation over a pooled collection
/// of residual vectors (all sensors, all days in the window).
///
/// When `exclude` is given, entries flagged 1 are left out of their slot's
/// average. A slot with nothing left takes its values from `previous`; without
/// `previous` that is a contract violation.
inline ResidualStats compute_stats(std::span<const ResidualVector> residuals,
                                   std::optional<std::span<const AnomalyFlags>> exclude = std::nullopt,
                                   const std::optional<ResidualStats>& previous = std::nullopt) {
    require(!residuals.empty(), "compute_stats: residual collection is empty");
    const Eigen::Index m = residuals.front().size();
    require(m >= 1, "compute_stats: residual vectors are empty");
    for (const auto& r : residuals) require(r.size() == m, "compute_stats: residual lengths differ");
    if (exclude) {
        require(exclude->size() == residuals.size(), "compute_stats: exclusion mask count mismatch");
        for (const auto& f : *exclude)
            require(static_cast<Eigen::Index>(f.size()) == m, "compute_stats: exclusion mask length mismatch");
    }
    if (previous) previous->validate(static_cast<std::size_t>(m));

    auto kept = [&](std::size_t i, Eigen::Index slot) {
        return !exclude || (*exclude)[i][static_cast<std::size_t>(slot)] == 0;
    };

    ResidualStats stats{Vector::Zero(m), Vector::Zero(m)};
    for (Eigen::Index slot = 0; slot < m; ++slot) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < residuals.size(); ++i) {
            if (!kept(i, slot)) continue;
            sum += residuals[i](slot);
            ++count;
        }
        if (count == 0) {
            require(previous.has_value(), "compute_stats: slot " + std::to_string(slot) +
                                              " has no retained entries and no previous stats");
            stats.mu(slot) = previous->mu(slot);
            stats.sigma(slot) = previous->sigma(slot);
            continue;
        }
        const double mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (std::size_t i = 0; i < residuals.size(); ++i) {
            if (!kept(i, slot)) continue;
            const double d = residuals[i](slot) - mean;
            sq += d * d;
        }
        stats.mu(slot) = mean;
        stats.sigma(slot) = std::sqrt(sq / static_cast<double>(count));
    }
    return stats;
}

}  // namespace dada
