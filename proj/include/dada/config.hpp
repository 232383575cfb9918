#pragma once

// JSON run configuration (schema version 1) and run manifests.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dada/cloud.hpp"
#include "dada/datagen.hpp"
#include "dada/error.hpp"
#include "dada/rng.hpp"
#include "dada/sim.hpp"

namespace dada {

inline constexpr int kConfigFormatVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

struct HeatmapGrid {
    std::vector<double> mu_v;
    std::vector<double> var_v;
};

struct SweepSpec {
    HeatmapGrid heatmap;
    std::vector<int> frequency_k;
    std::vector<int> adaptivity_k;
    std::vector<std::uint64_t> adaptivity_seeds;
};

struct RunConfig {
    SimConfig sim;
    SweepSpec sweep;
};

namespace detail {

/// Reads fields of one JSON object, tracking the dotted path for messages
/// and rejecting keys nobody asked for.
class FieldReader {
public:
    FieldReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string field(std::string_view name) const {
        return path_.empty() ? std::string(name) : path_ + "." + std::string(name);
    }

    bool has(std::string_view name) const { return obj_.contains(std::string(name)); }

    template <typename T>
    T required(std::string_view name) {
        seen_.insert(std::string(name));
        if (!has(name)) throw ConfigError(field(name), "missing required field");
        return convert<T>(obj_.at(std::string(name)), field(name));
    }

    template <typename T>
    T optional(std::string_view name, T fallback) {
        seen_.insert(std::string(name));
        if (!has(name)) return fallback;
        return convert<T>(obj_.at(std::string(name)), field(name));
    }

    FieldReader object(std::string_view name) {
        seen_.insert(std::string(name));
        if (!has(name)) throw ConfigError(field(name), "missing required section");
        return FieldReader(obj_.at(std::string(name)), field(name));
    }

    void finish() const {
        for (const auto& [key, _] : obj_.items())
            if (!seen_.contains(key)) throw ConfigError(field(key), "unknown field");
    }

private:
    template <typename T>
    static T convert(const nlohmann::json& v, const std::string& where) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(where, "expected a number");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                        throw ConfigError(where, "expected a non-negative integer");
                }
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(where, "expected a string");
            }
            return v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where, e.what());
        }
    }

    const nlohmann::json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Enum>
Enum parse_choice(const std::string& value, const std::string& where,
                  std::initializer_list<std::pair<const char*, Enum>> choices) {
    std::string allowed;
    for (const auto& [name, e] : choices) {
        if (value == name) return e;
        allowed += allowed.empty() ? name : std::string("|") + name;
    }
    throw ConfigError(where, "expected one of " + allowed + ", got '" + value + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const SimConfig& c) {
    return {
        {"signal",
         {{"sensors", c.signal.sensors},
          {"days", c.signal.days},
          {"readings_per_day", c.signal.readings_per_day},
          {"baseline", c.signal.baseline},
          {"diurnal_amplitude", c.signal.diurnal_amplitude},
          {"noise_std", c.signal.noise_std},
          {"ar_coeff", c.signal.ar_coeff},
          {"sensor_offset_std", c.signal.sensor_offset_std},
          {"drift_per_day", c.signal.drift_per_day},
          {"seed", c.signal.seed}}},
        {"anomalies",
         {{"kind", to_string(c.anomalies.kind)},
          {"rate_per_day", c.anomalies.rate_per_day},
          {"magnitude_mean", c.anomalies.magnitude_mean},
          {"magnitude_var", c.anomalies.magnitude_var},
          {"burst_slots", {c.anomalies.burst_min, c.anomalies.burst_max}},
          {"label_rule", to_string(c.anomalies.label_rule)},
          {"seed", c.anomalies.seed}}},
        {"network", {{"hidden_dim", c.shape.hidden_dim}}},
        {"training",
         {{"lambda", c.training.lambda},
          {"step_size", c.training.step_size},
          {"epochs", c.training.epochs},
          {"init_scale", c.training.init_scale},
          {"halve_on_increase", c.training.halve_on_increase},
          {"seed", c.training.seed}}},
        {"policy",
         {{"d_u", c.policy.d_u},
          {"scheme", to_string(c.policy.scheme)},
          {"stats_window_days", c.policy.stats_window_days},
          {"warm_start", c.policy.warm_start},
          {"stats_residuals", to_string(c.policy.stats_residuals)}}},
        {"detection", {{"p", c.threshold.p}, {"mode", to_string(c.mode)}}},
        {"simulation",
         {{"bootstrap_days", c.bootstrap_days}, {"drop_probability", c.drop_probability}, {"seed", c.seed}}},
    };
}

inline nlohmann::json to_json(const SweepSpec& s) {
    return {{"heatmap", {{"mu_v", s.heatmap.mu_v}, {"var_v", s.heatmap.var_v}}},
            {"frequency", {{"k", s.frequency_k}}},
            {"adaptivity", {{"k", s.adaptivity_k}, {"seeds", s.adaptivity_seeds}}}};
}

inline nlohmann::json to_json(const RunConfig& c) {
    auto j = to_json(c.sim);
    j["format_version"] = kConfigFormatVersion;
    j["sweep"] = to_json(c.sweep);
    return j;
}

/// Parses a config object. A run manifest is accepted as well: its
/// "config" member is used.
inline RunConfig parse_config(const nlohmann::json& root_in) {
    const nlohmann::json& root = root_in.contains("config") && root_in.contains("tool") ? root_in.at("config") : root_in;
    detail::FieldReader top(root, "");
    RunConfig rc;
    auto& c = rc.sim;
    const int version = top.required<int>("format_version");
    if (version != kConfigFormatVersion)
        throw ConfigError("format_version", "unsupported version " + std::to_string(version));

    {
        auto r = top.object("signal");
        c.signal.sensors = r.required<int>("sensors");
        c.signal.days = r.required<int>("days");
        c.signal.readings_per_day = r.required<int>("readings_per_day");
        c.signal.baseline = r.optional<double>("baseline", c.signal.baseline);
        c.signal.diurnal_amplitude = r.required<double>("diurnal_amplitude");
        c.signal.noise_std = r.required<double>("noise_std");
        c.signal.ar_coeff = r.optional<double>("ar_coeff", c.signal.ar_coeff);
        c.signal.sensor_offset_std = r.required<double>("sensor_offset_std");
        c.signal.drift_per_day = r.required<double>("drift_per_day");
        c.signal.seed = r.required<std::uint64_t>("seed");
        r.finish();
    }
    {
        auto r = top.object("anomalies");
        c.anomalies.kind = detail::parse_choice<AnomalyKind>(
            r.required<std::string>("kind"), r.field("kind"),
            {{"spike", AnomalyKind::Spike}, {"burst", AnomalyKind::Burst}, {"mixed", AnomalyKind::Mixed}});
        c.anomalies.rate_per_day = r.required<int>("rate_per_day");
        c.anomalies.magnitude_mean = r.required<double>("magnitude_mean");
        c.anomalies.magnitude_var = r.required<double>("magnitude_var");
        const auto burst = r.optional<std::vector<int>>("burst_slots", {c.anomalies.burst_min, c.anomalies.burst_max});
        if (burst.size() != 2) throw ConfigError(r.field("burst_slots"), "expected [min, max]");
        c.anomalies.burst_min = burst[0];
        c.anomalies.burst_max = burst[1];
        c.anomalies.label_rule = detail::parse_choice<LabelRule>(
            r.optional<std::string>("label_rule", "all"), r.field("label_rule"),
            {{"all", LabelRule::All}, {"above_mean", LabelRule::AboveMean}});
        c.anomalies.seed = r.required<std::uint64_t>("seed");
        r.finish();
    }
    {
        auto r = top.object("network");
        c.shape.hidden_dim = r.required<std::size_t>("hidden_dim");
        c.shape.input_dim = static_cast<std::size_t>(std::max(c.signal.readings_per_day, 0));
        r.finish();
    }
    {
        auto r = top.object("training");
        c.training.lambda = r.required<double>("lambda");
        c.training.step_size = r.required<double>("step_size");
        c.training.epochs = r.required<int>("epochs");
        c.training.init_scale = r.required<double>("init_scale");
        c.training.halve_on_increase = r.optional<bool>("halve_on_increase", true);
        c.training.seed = r.required<std::uint64_t>("seed");
        r.finish();
        if (!(c.training.step_size > 0.0)) throw ConfigError(r.field("step_size"), "must be > 0");
    }
    {
        auto r = top.object("policy");
        c.policy.d_u = r.required<int>("d_u");
        c.policy.scheme = detail::parse_choice<RetrainScheme>(
            r.required<std::string>("scheme"), r.field("scheme"),
            {{"random", RetrainScheme::Random}, {"prioritized", RetrainScheme::Prioritized}});
        c.policy.stats_window_days = r.optional<int>("stats_window_days", 0);
        c.policy.warm_start = r.optional<bool>("warm_start", true);
        c.policy.stats_residuals = detail::parse_choice<StatsResiduals>(
            r.optional<std::string>("stats_residuals", "recomputed"), r.field("stats_residuals"),
            {{"recomputed", StatsResiduals::Recomputed}, {"uploaded", StatsResiduals::Uploaded}});
        r.finish();
    }
    {
        auto r = top.object("detection");
        c.threshold.p = r.required<double>("p");
        c.mode = detail::parse_choice<DetectionMode>(
            r.optional<std::string>("mode", "batch"), r.field("mode"),
            {{"batch", DetectionMode::BatchDaily}, {"per_reading", DetectionMode::PerReading}});
        r.finish();
    }
    {
        auto r = top.object("simulation");
        c.bootstrap_days = r.required<int>("bootstrap_days");
        c.drop_probability = r.optional<double>("drop_probability", 0.0);
        c.seed = r.required<std::uint64_t>("seed");
        r.finish();
    }
    if (top.has("sweep")) {
        auto r = top.object("sweep");
        if (r.has("heatmap")) {
            auto h = r.object("heatmap");
            rc.sweep.heatmap.mu_v = h.required<std::vector<double>>("mu_v");
            rc.sweep.heatmap.var_v = h.required<std::vector<double>>("var_v");
            h.finish();
        }
        if (r.has("frequency")) {
            auto f = r.object("frequency");
            rc.sweep.frequency_k = f.required<std::vector<int>>("k");
            f.finish();
        }
        if (r.has("adaptivity")) {
            auto a = r.object("adaptivity");
            rc.sweep.adaptivity_k = a.required<std::vector<int>>("k");
            rc.sweep.adaptivity_seeds = a.required<std::vector<std::uint64_t>>("seeds");
            a.finish();
        }
        r.finish();
    }
    top.finish();

    try {
        c.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError("", e.what());
    }
    return rc;
}

/// Parses config text; syntax errors report line and column.
inline RunConfig parse_config_text(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError("", "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                                  ": " + e.what());
    }
    return parse_config(j);
}

/// Points every module seed at seed + hash(module tag).
inline void apply_seed_override(SimConfig& c, std::uint64_t seed) {
    c.signal.seed = derive_seed(seed, "signal");
    c.anomalies.seed = derive_seed(seed, "anomalies");
    c.training.seed = derive_seed(seed, "training");
    c.seed = derive_seed(seed, "simulation");
}

inline nlohmann::json seeds_json(const SimConfig& c) {
    return {{"signal", c.signal.seed}, {"anomalies", c.anomalies.seed}, {"training", c.training.seed},
            {"simulation", c.seed}};
}

}  // namespace dada
