#pragma once

// Synthetic multi-sensor daily series with spike and burst injection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/error.hpp"
#include "dada/rng.hpp"

namespace dada {

inline constexpr double kCleanLow = 0.1;
inline constexpr double kCleanHigh = 0.9;

struct SignalConfig {
    int sensors = 8;
    int days = 60;
    int readings_per_day = 144;
    double baseline = 0.5;
    double diurnal_amplitude = 0.2;
    double noise_std = 0.02;
    double ar_coeff = 0.8;  // lag-1 autocorrelation of the noise
    double sensor_offset_std = 0.01;
    double drift_per_day = 0.0;
    std::uint64_t seed = 1;

    void validate() const {
        require(sensors >= 1, "SignalConfig: sensors must be >= 1");
        require(days >= 1, "SignalConfig: days must be >= 1");
        require(readings_per_day >= 2, "SignalConfig: readings_per_day must be >= 2");
        require(std::isfinite(baseline) && std::isfinite(diurnal_amplitude) && std::isfinite(drift_per_day),
                "SignalConfig: non-finite parameter");
        require(std::isfinite(noise_std) && noise_std >= 0.0, "SignalConfig: noise_std must be >= 0");
        require(std::isfinite(sensor_offset_std) && sensor_offset_std >= 0.0,
                "SignalConfig: sensor_offset_std must be >= 0");
        require(ar_coeff > -1.0 && ar_coeff < 1.0, "SignalConfig: ar_coeff must lie in (-1,1)");
    }
};

enum class AnomalyKind { Spike, Burst, Mixed };

/// Which injected anomalies count as positives.
enum class LabelRule {
    All,        // every injected slot
    AboveMean,  // only v > magnitude_mean; the rest are tolerated environmental changes
};

inline const char* to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::Spike: return "spike";
        case AnomalyKind::Burst: return "burst";
        case AnomalyKind::Mixed: return "mixed";
    }
    return "?";
}

inline const char* to_string(LabelRule r) { return r == LabelRule::All ? "all" : "above_mean"; }

struct AnomalySpec {
    AnomalyKind kind = AnomalyKind::Spike;
    int rate_per_day = 0;  // K, across all sensors
    double magnitude_mean = 0.0;
    double magnitude_var = 0.0;
    int burst_min = 5;
    int burst_max = 30;
    LabelRule label_rule = LabelRule::All;
    std::uint64_t seed = 2;

    void validate(const SignalConfig& signal) const {
        require(rate_per_day >= 0, "AnomalySpec: rate_per_day must be >= 0");
        require(static_cast<long long>(rate_per_day) <=
                    static_cast<long long>(signal.sensors) * signal.readings_per_day,
                "AnomalySpec: rate_per_day exceeds the " +
                    std::to_string(static_cast<long long>(signal.sensors) * signal.readings_per_day) +
                    " available sites per day");
        require(std::isfinite(magnitude_mean), "AnomalySpec: magnitude_mean must be finite");
        require(std::isfinite(magnitude_var) && magnitude_var >= 0.0, "AnomalySpec: magnitude_var must be >= 0");
        require(burst_min >= 1 && burst_max >= burst_min, "AnomalySpec: burst range must satisfy 1 <= min <= max");
    }
};

struct Injection {
    int sensor = 0;      // 0-based
    int day = 0;         // 0-based
    int first_slot = 0;  // inclusive
    int last_slot = 0;   // inclusive
    double v = 0.0;
    AnomalyKind kind = AnomalyKind::Spike;
    bool labeled = true;
    bool clamp_collision = false;  // some slot of the support ended up unchanged
};

/// S x days x M readings with matching labels; all indices 0-based.
struct LabeledDataset {
    int sensors = 0;
    int days = 0;
    int readings_per_day = 0;
    std::vector<double> readings;
    std::vector<std::uint8_t> labels;
    std::vector<Injection> injection_log;

    LabeledDataset() = default;
    LabeledDataset(int s, int d, int m)
        : sensors(s),
          days(d),
          readings_per_day(m),
          readings(static_cast<std::size_t>(s) * d * m, 0.0),
          labels(static_cast<std::size_t>(s) * d * m, 0) {}

    std::size_t index(int s, int d, int m) const {
        return (static_cast<std::size_t>(s) * days + static_cast<std::size_t>(d)) * readings_per_day +
               static_cast<std::size_t>(m);
    }

    std::span<double> day(int s, int d) {
        return {readings.data() + index(s, d, 0), static_cast<std::size_t>(readings_per_day)};
    }
    std::span<const double> day(int s, int d) const {
        return {readings.data() + index(s, d, 0), static_cast<std::size_t>(readings_per_day)};
    }
    std::span<std::uint8_t> day_labels(int s, int d) {
        return {labels.data() + index(s, d, 0), static_cast<std::size_t>(readings_per_day)};
    }
    std::span<const std::uint8_t> day_labels(int s, int d) const {
        return {labels.data() + index(s, d, 0), static_cast<std::size_t>(readings_per_day)};
    }

    Sample sample(int s, int d) const {
        const auto v = day(s, d);
        return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    std::size_t label_count() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    }
};

inline LabeledDataset generate_clean(const SignalConfig& config) {
    config.validate();
    const int S = config.sensors, D = config.days, M = config.readings_per_day;
    LabeledDataset ds(S, D, M);
    Rng rng(config.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    std::vector<double> offsets(static_cast<std::size_t>(S));
    for (auto& o : offsets) o = config.sensor_offset_std * unit(rng);

    std::vector<double> pattern(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m)
        pattern[static_cast<std::size_t>(m)] =
            -config.diurnal_amplitude * std::cos(2.0 * std::numbers::pi * m / static_cast<double>(M));

    const double innovation = config.noise_std * std::sqrt(1.0 - config.ar_coeff * config.ar_coeff);
    for (int s = 0; s < S; ++s) {
        double e = config.noise_std * unit(rng);
        for (int d = 0; d < D; ++d) {
            auto row = ds.day(s, d);
            for (int m = 0; m < M; ++m) {
                if (d > 0 || m > 0) e = config.ar_coeff * e + innovation * unit(rng);
                const double v = config.baseline + pattern[static_cast<std::size_t>(m)] +
                                 offsets[static_cast<std::size_t>(s)] + config.drift_per_day * d + e;
                row[static_cast<std::size_t>(m)] = std::clamp(v, kCleanLow, kCleanHigh);
            }
        }
    }
    return ds;
}

/// x'(t) = x(t) + v at one slot, clamped to [0,1]. `slot` is 0-based.
inline void inject_spike(std::span<double> series, std::size_t slot, double v) {
    require(slot < series.size(), "inject_spike: slot out of range");
    series[slot] = std::clamp(series[slot] + v, 0.0, 1.0);
}

/// Constant offset v over slots [start, end] (0-based, inclusive), clamped to [0,1].
inline void inject_burst(std::span<double> series, std::size_t start, std::size_t end, double v) {
    require(start <= end, "inject_burst: start must not exceed end");
    require(end < series.size(), "inject_burst: end out of range");
    for (std::size_t t = start; t <= end; ++t) series[t] = std::clamp(series[t] + v, 0.0, 1.0);
}

/// Draws rate_per_day sites per day (days >= first_day) uniformly without
/// replacement over (sensor, slot) and injects one anomaly at each.
inline LabeledDataset inject(LabeledDataset ds, const AnomalySpec& spec, int first_day = 0) {
    const SignalConfig shape{.sensors = ds.sensors, .days = ds.days, .readings_per_day = ds.readings_per_day};
    spec.validate(shape);
    require(first_day >= 0, "inject: first_day must be >= 0");
    if (spec.rate_per_day == 0) return ds;

    const int M = ds.readings_per_day;
    const std::size_t sites = static_cast<std::size_t>(ds.sensors) * static_cast<std::size_t>(M);
    Rng rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const double magnitude_std = std::sqrt(spec.magnitude_var);
    std::uniform_int_distribution<int> duration(spec.burst_min, spec.burst_max);
    std::bernoulli_distribution coin(0.5);

    std::vector<std::size_t> pool(sites);
    for (int d = first_day; d < ds.days; ++d) {
        for (std::size_t i = 0; i < sites; ++i) pool[i] = i;
        // partial Fisher-Yates: the first K entries are the day's sites
        for (std::size_t i = 0; i < static_cast<std::size_t>(spec.rate_per_day); ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, sites - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        for (std::size_t i = 0; i < static_cast<std::size_t>(spec.rate_per_day); ++i) {
            Injection inj;
            inj.sensor = static_cast<int>(pool[i] / static_cast<std::size_t>(M));
            inj.day = d;
            inj.first_slot = static_cast<int>(pool[i] % static_cast<std::size_t>(M));
            inj.v = spec.magnitude_mean + magnitude_std * unit(rng);
            inj.kind = spec.kind;
            if (spec.kind == AnomalyKind::Mixed) inj.kind = coin(rng) ? AnomalyKind::Burst : AnomalyKind::Spike;
            inj.last_slot = inj.first_slot;
            if (inj.kind == AnomalyKind::Burst) inj.last_slot = std::min(inj.first_slot + duration(rng) - 1, M - 1);
            inj.labeled = spec.label_rule == LabelRule::All || inj.v > spec.magnitude_mean;

            auto row = ds.day(inj.sensor, d);
            const std::vector<double> before(row.begin() + inj.first_slot, row.begin() + inj.last_slot + 1);
            if (inj.kind == AnomalyKind::Spike)
                inject_spike(row, static_cast<std::size_t>(inj.first_slot), inj.v);
            else
                inject_burst(row, static_cast<std::size_t>(inj.first_slot), static_cast<std::size_t>(inj.last_slot),
                             inj.v);
            for (int t = inj.first_slot; t <= inj.last_slot; ++t)
                if (row[static_cast<std::size_t>(t)] == before[static_cast<std::size_t>(t - inj.first_slot)])
                    inj.clamp_collision = true;
            if (inj.labeled) {
                auto lab = ds.day_labels(inj.sensor, d);
                for (int t = inj.first_slot; t <= inj.last_slot; ++t) lab[static_cast<std::size_t>(t)] = 1;
            }
            ds.injection_log.push_back(inj);
        }
    }
    return ds;
}

}  // namespace dada
