#pragma once

// Cloud-side half: stores daily uploads, retrains every d_u days and
// recomputes the residual envelope, then broadcasts the result.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/detector.hpp"
#include "dada/error.hpp"
#include "dada/messages.hpp"
#include "dada/rng.hpp"
#include "dada/sensor_node.hpp"

namespace dada {

enum class RetrainScheme { Random, Prioritized };

/// Which residuals feed the recomputed statistics.
enum class StatsResiduals {
    Recomputed,  // stored x passed through the freshly trained model
    Uploaded,    // residuals exactly as the sensors reported them
};

inline const char* to_string(RetrainScheme s) { return s == RetrainScheme::Random ? "random" : "prioritized"; }
inline const char* to_string(StatsResiduals s) { return s == StatsResiduals::Recomputed ? "recomputed" : "uploaded"; }

struct RetrainPolicy {
    int d_u = 14;
    RetrainScheme scheme = RetrainScheme::Random;
    /// Days of residuals pooled into the statistics; 0 picks the scheme
    /// default (all history for Random, 2*d_u for Prioritized).
    int stats_window_days = 0;
    bool warm_start = true;
    StatsResiduals stats_residuals = StatsResiduals::Recomputed;

    void validate() const {
        require(d_u >= 1, "RetrainPolicy: d_u must be >= 1");
        require(stats_window_days >= 0, "RetrainPolicy: stats_window_days must be >= 0");
    }

    /// Effective window; 0 means unbounded.
    int effective_stats_window() const {
        if (stats_window_days > 0) return stats_window_days;
        return scheme == RetrainScheme::Random ? 0 : 2 * d_u;
    }
};

class TrainingStore {
public:
    explicit TrainingStore(int sensors) : sensors_(sensors) { require(sensors >= 1, "TrainingStore: sensors must be >= 1"); }

    void receive(UploadMessage msg) {
        require(msg.sensor_id >= 1 && msg.sensor_id <= sensors_,
                "receive_upload: sensor id " + std::to_string(msg.sensor_id) + " out of range");
        require(msg.day_index >= 1, "receive_upload: day index must be >= 1");
        require(msg.day_index > completed_day_, "receive_upload: day " + std::to_string(msg.day_index) + " already closed");
        const auto key = std::make_pair(msg.day_index, msg.sensor_id);
        require(!records_.contains(key), "receive_upload: duplicate record for sensor " +
                                             std::to_string(msg.sensor_id) + " day " + std::to_string(msg.day_index));
        records_.emplace(key, std::move(msg));
        advance();
    }

    /// Closes `day` even if some sensor's upload never arrived.
    void close_day(int day) {
        require(day == completed_day_ + 1 || day == completed_day_, "close_day: days must close in order");
        completed_day_ = day;
        advance();
    }

    int sensors() const { return sensors_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    int completed_day() const { return completed_day_; }

    std::size_t day_count(int day) const {
        auto lo = records_.lower_bound({day, 0});
        auto hi = records_.lower_bound({day + 1, 0});
        return static_cast<std::size_t>(std::distance(lo, hi));
    }

    /// Distinct stored days, ascending.
    std::vector<int> days() const {
        std::vector<int> out;
        for (const auto& [key, _] : records_)
            if (out.empty() || out.back() != key.first) out.push_back(key.first);
        return out;
    }

    std::vector<const UploadMessage*> records_for_day(int day) const {
        std::vector<const UploadMessage*> out;
        for (auto it = records_.lower_bound({day, 0}); it != records_.end() && it->first.first == day; ++it)
            out.push_back(&it->second);
        return out;
    }

    const UploadMessage* find(int sensor, int day) const {
        auto it = records_.find({day, sensor});
        return it == records_.end() ? nullptr : &it->second;
    }

private:
    void advance() {
        while (day_count(completed_day_ + 1) == static_cast<std::size_t>(sensors_)) ++completed_day_;
    }

    int sensors_;
    int completed_day_ = 0;
    std::map<std::pair<int, int>, UploadMessage> records_;  // (day, sensor)
};

namespace detail {

inline std::vector<int> last_days(const std::vector<int>& days, std::size_t n) {
    if (n == 0 || n >= days.size()) return days;
    return {days.end() - static_cast<std::ptrdiff_t>(n), days.end()};
}

}  // namespace detail

/// Days whose x vectors go into the training set, before shuffling.
inline std::vector<int> training_days(const TrainingStore& store, const RetrainPolicy& policy, Rng& rng) {
    auto days = store.days();
    if (policy.scheme == RetrainScheme::Random) return days;
    const auto d_u = static_cast<std::size_t>(policy.d_u);
    if (days.size() <= d_u) return days;
    std::vector<int> recent(days.end() - static_cast<std::ptrdiff_t>(d_u), days.end());
    std::vector<int> older(days.begin(), days.end() - static_cast<std::ptrdiff_t>(d_u));
    std::vector<int> picked;
    std::sample(older.begin(), older.end(), std::back_inserter(picked), std::min(d_u, older.size()), rng);
    picked.insert(picked.end(), recent.begin(), recent.end());
    return picked;
}

inline std::vector<Sample> assemble_training_set(const TrainingStore& store, const RetrainPolicy& policy,
                                                 std::uint64_t seed) {
    require(!store.empty(), "assemble_training_set: store is empty");
    policy.validate();
    Rng rng(seed);
    std::vector<Sample> samples;
    for (int day : training_days(store, policy, rng))
        for (const auto* rec : store.records_for_day(day)) samples.push_back(rec->x);
    std::shuffle(samples.begin(), samples.end(), rng);
    return samples;
}

struct RetrainOutcome {
    ModelUpdate update;
    std::vector<double> cost_trace;
    std::size_t training_samples = 0;
    std::vector<int> stats_days;
};

/// Residual statistics for `params` over the store's window with flagged
/// entries excluded.
inline ResidualStats window_stats(const TrainingStore& store, const RetrainPolicy& policy, const ModelParams& params,
                                  const ResidualStats& previous, std::vector<int>* used_days = nullptr) {
    const auto window = detail::last_days(store.days(), static_cast<std::size_t>(policy.effective_stats_window()));
    std::vector<ResidualVector> residuals;
    std::vector<AnomalyFlags> flags;
    for (int day : window) {
        for (const auto* rec : store.records_for_day(day)) {
            if (policy.stats_residuals == StatsResiduals::Recomputed)
                residuals.push_back(residual(rec->x, forward(params, rec->x).output));
            else
                residuals.push_back(rec->r);
            flags.push_back(rec->alpha);
        }
    }
    if (used_days) *used_days = window;
    return compute_stats(residuals, std::span<const AnomalyFlags>(flags), previous);
}

/// Retrains when `day` is a multiple of d_u; otherwise returns nothing.
inline std::optional<RetrainOutcome> maybe_retrain(const TrainingStore& store, const RetrainPolicy& policy,
                                                   const ModelParams& current_params,
                                                   const ResidualStats& current_stats, const TrainingConfig& tc,
                                                   int day, std::uint64_t seed) {
    policy.validate();
    require(day == store.completed_day(), "maybe_retrain: day " + std::to_string(day) +
                                              " is not the store's completed day " +
                                              std::to_string(store.completed_day()));
    if (day % policy.d_u != 0) return std::nullopt;

    const auto samples = assemble_training_set(store, policy, mix_seed(seed + static_cast<std::uint64_t>(day)));
    ModelParams start = policy.warm_start
                            ? current_params
                            : init_params(current_params.shape(), tc.init_scale,
                                          mix_seed(tc.seed + static_cast<std::uint64_t>(day)));
    auto trained = train(start, std::span<const Sample>(samples), tc);

    RetrainOutcome out;
    out.update.stats = window_stats(store, policy, trained.params, current_stats, &out.stats_days);
    out.update.params = std::move(trained.params);
    out.update.effective_day = day + 1;
    out.cost_trace = std::move(trained.cost_trace);
    out.training_samples = samples.size();
    return out;
}

struct DeliveryReceipt {
    int sensor_id = 0;
    int effective_day = 0;
};

inline std::vector<DeliveryReceipt> broadcast_update(const ModelUpdate& update, std::span<SensorNode> sensors) {
    std::vector<DeliveryReceipt> receipts;
    receipts.reserve(sensors.size());
    for (auto& node : sensors) {
        node.apply_update(update);
        receipts.push_back({node.id(), update.effective_day});
    }
    return receipts;
}

/// The cloud actor: store, current model and an event log.
class Cloud {
public:
    Cloud(int sensors, RetrainPolicy policy, TrainingConfig training, ModelParams params, ResidualStats stats,
          std::uint64_t seed)
        : store_(sensors),
          policy_(policy),
          training_(training),
          params_(std::move(params)),
          stats_(std::move(stats)),
          seed_(seed) {
        policy_.validate();
        training_.validate();
    }

    void receive_upload(UploadMessage msg) {
        std::vector<int> flagged;
        for (std::size_t m = 0; m < msg.alpha.size(); ++m)
            if (msg.alpha[m]) flagged.push_back(static_cast<int>(m));
        if (!flagged.empty()) {
            events_.push_back({{"type", "anomaly_report"},
                               {"day", msg.day_index},
                               {"sensor", msg.sensor_id},
                               {"slots", flagged}});
        }
        store_.receive(std::move(msg));
    }

    /// Closes the day and retrains if due.
    std::optional<RetrainOutcome> end_day(int day) {
        if (store_.completed_day() < day) store_.close_day(day);
        auto outcome = maybe_retrain(store_, policy_, params_, stats_, training_, day, seed_);
        if (outcome) {
            params_ = outcome->update.params;
            stats_ = outcome->update.stats;
            events_.push_back({{"type", "retrain"},
                               {"day", day},
                               {"effective_day", outcome->update.effective_day},
                               {"scheme", to_string(policy_.scheme)},
                               {"training_samples", outcome->training_samples},
                               {"stats_days", outcome->stats_days},
                               {"cost_trace", outcome->cost_trace},
                               {"stats", to_json(outcome->update.stats)}});
        }
        return outcome;
    }

    const TrainingStore& store() const { return store_; }
    const ModelParams& params() const { return params_; }
    const ResidualStats& stats() const { return stats_; }
    const std::vector<nlohmann::json>& events() const { return events_; }

private:
    TrainingStore store_;
    RetrainPolicy policy_;
    TrainingConfig training_;
    ModelParams params_;
    ResidualStats stats_;
    std::uint64_t seed_;
    std::vector<nlohmann::json> events_;
};

}  // namespace dada
