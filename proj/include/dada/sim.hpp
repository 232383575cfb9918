#pragma once

// Day-clocked orchestration of the sensors, the relaying gateway and the
// cloud. Single-threaded and fully determined by the config.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/cloud.hpp"
#include "dada/datagen.hpp"
#include "dada/detector.hpp"
#include "dada/error.hpp"
#include "dada/messages.hpp"
#include "dada/sensor_node.hpp"

namespace dada {

struct SimConfig {
    SignalConfig signal;
    AnomalySpec anomalies;
    NetworkShape shape{144, 100};
    TrainingConfig training{.halve_on_increase = true};
    RetrainPolicy policy;
    DetectionThreshold threshold;
    int bootstrap_days = 14;
    DetectionMode mode = DetectionMode::BatchDaily;
    /// Upload loss probability; the transport is lossless unless this is raised.
    double drop_probability = 0.0;
    std::uint64_t seed = 3;

    void validate() const {
        signal.validate();
        anomalies.validate(signal);
        shape.validate();
        training.validate();
        policy.validate();
        threshold.validate();
        require(static_cast<int>(shape.input_dim) == signal.readings_per_day,
                "SimConfig: shape.input_dim must equal signal.readings_per_day");
        require(bootstrap_days >= 1, "SimConfig: bootstrap_days must be >= 1");
        require(bootstrap_days < signal.days, "SimConfig: bootstrap_days must be < signal.days");
        require(drop_probability >= 0.0 && drop_probability < 1.0, "SimConfig: drop_probability must lie in [0,1)");
    }
};

struct DayComms {
    int day = 0;
    std::uint64_t uplink_messages = 0;
    std::uint64_t uplink_bytes = 0;
    std::uint64_t alert_messages = 0;
    std::uint64_t alert_bytes = 0;
    std::uint64_t downlink_messages = 0;
    std::uint64_t downlink_bytes = 0;
    std::uint64_t sensor_to_sensor_messages = 0;
    std::uint64_t sensor_to_sensor_bytes = 0;
    std::uint64_t dropped_uploads = 0;

    friend bool operator==(const DayComms&, const DayComms&) = default;
};

struct RetrainEvent {
    int day = 0;
    int effective_day = 0;
    std::size_t training_samples = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;

    friend bool operator==(const RetrainEvent&, const RetrainEvent&) = default;
};

/// Per-slot records for every post-bootstrap day. Days are 1-based globally
/// (bootstrap occupies days 1..bootstrap_days); arrays are indexed by
/// (sensor, eval day, slot) with all three 0-based.
struct SimResult {
    int sensors = 0;
    int total_days = 0;
    int bootstrap_days = 0;
    int readings_per_day = 0;

    std::vector<double> reading;
    std::vector<double> reconstruction;
    std::vector<double> residual;
    std::vector<std::uint8_t> flag;
    std::vector<std::uint8_t> label;
    std::vector<double> score;

    std::vector<DayComms> comms;
    std::vector<RetrainEvent> retrains;
    std::vector<std::uint64_t> alerts_per_sensor;
    std::vector<nlohmann::json> events;

    double bootstrap_rmse = 0.0;
    std::uint64_t inference_macs = 0;

    ModelParams initial_params;
    std::vector<ModelParams> update_params;  // parallel to retrains

    int eval_days() const { return total_days - bootstrap_days; }

    std::size_t index(int s, int e, int m) const {
        return (static_cast<std::size_t>(s) * static_cast<std::size_t>(eval_days()) + static_cast<std::size_t>(e)) *
                   static_cast<std::size_t>(readings_per_day) +
               static_cast<std::size_t>(m);
    }

    void allocate() {
        const std::size_t n = static_cast<std::size_t>(sensors) * static_cast<std::size_t>(eval_days()) *
                              static_cast<std::size_t>(readings_per_day);
        reading.assign(n, 0.0);
        reconstruction.assign(n, 0.0);
        residual.assign(n, 0.0);
        flag.assign(n, 0);
        label.assign(n, 0);
        score.assign(n, 0.0);
        alerts_per_sensor.assign(static_cast<std::size_t>(sensors), 0);
    }

    double flagged_fraction() const {
        if (flag.empty()) return 0.0;
        std::size_t n = 0;
        for (auto f : flag) n += f;
        return static_cast<double>(n) / static_cast<double>(flag.size());
    }
};

namespace detail {

template <typename Fn>
decltype(auto) with_context(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(e.epoch(), where + ": " + e.what());
    } catch (const ContractViolation& e) {
        throw ContractViolation(where + ": " + e.what());
    }
}

}  // namespace detail

/// Trains the initial model on the anomaly-free bootstrap days of `data`.
struct Bootstrap {
    ModelParams params;
    ResidualStats stats;
    std::vector<UploadMessage> records;  // one per (sensor, bootstrap day), alpha all zero
    double rmse = 0.0;
};

inline Bootstrap bootstrap_model(const SimConfig& config, const LabeledDataset& data) {
    std::vector<Sample> samples;
    for (int d = 0; d < config.bootstrap_days; ++d)
        for (int s = 0; s < data.sensors; ++s) samples.push_back(data.sample(s, d));

    Bootstrap b;
    auto start = init_params(config.shape, config.training.init_scale, config.training.seed);
    b.params = train(start, std::span<const Sample>(samples), config.training).params;

    std::vector<ResidualVector> residuals;
    double sq = 0.0;
    std::size_t i = 0;
    for (int d = 0; d < config.bootstrap_days; ++d) {
        for (int s = 0; s < data.sensors; ++s, ++i) {
            UploadMessage rec;
            rec.sensor_id = s + 1;
            rec.day_index = d + 1;
            rec.x = samples[i];
            rec.x_hat = forward(b.params, rec.x).output;
            rec.r = residual(rec.x, rec.x_hat);
            rec.alpha.assign(static_cast<std::size_t>(rec.x.size()), 0);
            sq += rec.r.squaredNorm();
            residuals.push_back(rec.r);
            b.records.push_back(std::move(rec));
        }
    }
    b.stats = compute_stats(residuals);
    b.rmse = std::sqrt(sq / static_cast<double>(residuals.size() * config.shape.input_dim));
    return b;
}

inline LabeledDataset simulation_dataset(const SimConfig& config) {
    return inject(generate_clean(config.signal), config.anomalies, config.bootstrap_days);
}

inline SimResult run_simulation(const SimConfig& config) {
    config.validate();
    const int S = config.signal.sensors;
    const int M = config.signal.readings_per_day;
    const auto data = simulation_dataset(config);
    auto boot = detail::with_context("bootstrap", [&] { return bootstrap_model(config, data); });

    SimResult result;
    result.sensors = S;
    result.total_days = config.signal.days;
    result.bootstrap_days = config.bootstrap_days;
    result.readings_per_day = M;
    result.bootstrap_rmse = boot.rmse;
    result.initial_params = boot.params;
    result.allocate();

    std::vector<SensorNode> nodes;
    nodes.reserve(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        const auto& last = boot.records[static_cast<std::size_t>((config.bootstrap_days - 1) * S + s)];
        nodes.emplace_back(s + 1, boot.params, boot.stats, config.threshold, config.mode, config.bootstrap_days + 1,
                           last.x_hat);
    }

    Cloud cloud(S, config.policy, config.training, boot.params, boot.stats, config.seed);
    for (auto& rec : boot.records) cloud.receive_upload(std::move(rec));

    Rng transport(derive_seed(config.seed, "transport"));
    std::bernoulli_distribution drop(config.drop_probability);
    const auto upload_bytes = upload_wire_bytes(static_cast<std::size_t>(M));
    const auto update_bytes = update_wire_bytes(config.shape);
    std::optional<ModelUpdate> pending;

    for (int day = config.bootstrap_days + 1; day <= config.signal.days; ++day) {
        const int e = day - config.bootstrap_days - 1;
        DayComms comms;
        comms.day = day;

        if (pending && pending->effective_day == day) {
            broadcast_update(*pending, std::span<SensorNode>(nodes));
            pending.reset();
        }

        for (int s = 0; s < S; ++s) {
            auto& node = nodes[static_cast<std::size_t>(s)];
            const auto where = "day " + std::to_string(day) + " sensor " + std::to_string(s + 1);
            const auto readings = data.day(s, day - 1);
            detail::with_context(where, [&] {
                for (int m = 0; m < M; ++m) {
                    if (auto alert = node.ingest_reading(readings[static_cast<std::size_t>(m)], static_cast<std::size_t>(m))) {
                        ++comms.alert_messages;
                        comms.alert_bytes += kAlertWireBytes;
                        ++result.alerts_per_sensor[static_cast<std::size_t>(s)];
                        result.events.push_back({{"type", "alert"},
                                                 {"day", day},
                                                 {"sensor", alert->sensor_id},
                                                 {"slot", alert->slot},
                                                 {"residual", alert->residual},
                                                 {"score", alert->score}});
                    }
                }
                const auto& stats = node.stats();
                auto msg = node.end_of_day(day);
                const auto labels = data.day_labels(s, day - 1);
                for (int m = 0; m < M; ++m) {
                    const auto i = result.index(s, e, m);
                    const auto mi = static_cast<Eigen::Index>(m);
                    result.reading[i] = msg.x(mi);
                    result.reconstruction[i] = msg.x_hat(mi);
                    result.residual[i] = msg.r(mi);
                    result.flag[i] = msg.alpha[static_cast<std::size_t>(m)];
                    result.label[i] = labels[static_cast<std::size_t>(m)];
                    result.score[i] = deviation_score(msg.r(mi), stats.mu(mi), stats.sigma(mi));
                }
                ++comms.uplink_messages;
                comms.uplink_bytes += upload_bytes;
                if (config.drop_probability > 0.0 && drop(transport)) {
                    ++comms.dropped_uploads;
                    return;
                }
                cloud.receive_upload(std::move(msg));
            });
        }

        auto outcome = detail::with_context("day " + std::to_string(day) + " cloud", [&] { return cloud.end_day(day); });
        if (outcome) {
            result.retrains.push_back({day, outcome->update.effective_day, outcome->training_samples,
                                       outcome->cost_trace.front(), outcome->cost_trace.back()});
            result.update_params.push_back(outcome->update.params);
            comms.downlink_messages += static_cast<std::uint64_t>(S);
            comms.downlink_bytes += static_cast<std::uint64_t>(S) * update_bytes;
            pending = std::move(outcome->update);
        }
        result.comms.push_back(comms);
    }

    for (const auto& node : nodes) result.inference_macs += node.mac_count();
    // cloud events first (anomaly reports, retrains), then per-reading alerts
    std::vector<nlohmann::json> events = cloud.events();
    events.insert(events.end(), result.events.begin(), result.events.end());
    result.events = std::move(events);
    return result;
}

struct CommReport {
    std::vector<std::uint64_t> uplink_per_sensor;    // daily uploads + alerts
    std::vector<std::uint64_t> downlink_per_sensor;  // model updates received
    std::uint64_t uplink_bytes = 0;
    std::uint64_t downlink_bytes = 0;
    std::uint64_t sensor_to_sensor_messages = 0;
    std::uint64_t sensor_to_sensor_bytes = 0;
    std::uint64_t dropped_uploads = 0;
    /// Readings sensed per uplink message, averaged over sensors.
    double readings_per_uplink = 0.0;
};

inline CommReport communication_report(const SimResult& result) {
    CommReport rep;
    const auto S = static_cast<std::size_t>(result.sensors);
    std::uint64_t uploads = 0, downlinks = 0;
    for (const auto& c : result.comms) {
        uploads += c.uplink_messages;
        downlinks += c.downlink_messages;
        rep.uplink_bytes += c.uplink_bytes + c.alert_bytes;
        rep.downlink_bytes += c.downlink_bytes;
        rep.sensor_to_sensor_messages += c.sensor_to_sensor_messages;
        rep.sensor_to_sensor_bytes += c.sensor_to_sensor_bytes;
        rep.dropped_uploads += c.dropped_uploads;
    }
    rep.uplink_per_sensor.assign(S, uploads / std::max<std::size_t>(S, 1));
    rep.downlink_per_sensor.assign(S, downlinks / std::max<std::size_t>(S, 1));
    std::uint64_t total_up = 0;
    for (std::size_t s = 0; s < S; ++s) {
        if (s < result.alerts_per_sensor.size()) rep.uplink_per_sensor[s] += result.alerts_per_sensor[s];
        total_up += rep.uplink_per_sensor[s];
    }
    if (total_up > 0)
        rep.readings_per_uplink = static_cast<double>(result.eval_days()) * result.readings_per_day *
                                  static_cast<double>(S) / static_cast<double>(total_up);
    return rep;
}

}  // namespace dada
