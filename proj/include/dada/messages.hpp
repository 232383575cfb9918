#pragma once

// Payloads exchanged between sensors and the cloud, and their wire sizes.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/detector.hpp"

namespace dada {

/// Daily sensor -> cloud record.
struct UploadMessage {
    int sensor_id = 0;
    int day_index = 0;
    Sample x;
    Vector x_hat;
    ResidualVector r;
    AnomalyFlags alpha;

    friend bool operator==(const UploadMessage& a, const UploadMessage& b) {
        return a.sensor_id == b.sensor_id && a.day_index == b.day_index && a.x.size() == b.x.size() &&
               a.x_hat.size() == b.x_hat.size() && a.r.size() == b.r.size() && a.x == b.x &&
               a.x_hat == b.x_hat && a.r == b.r && a.alpha == b.alpha;
    }
};

/// Cloud -> sensor broadcast after a retrain.
struct ModelUpdate {
    ModelParams params;
    ResidualStats stats;
    int effective_day = 0;
};

/// Per-reading alert; only sent when the slot is flagged.
struct Alert {
    int sensor_id = 0;
    int day_index = 0;
    int slot = 0;  // 0-based
    double residual = 0.0;
    double score = 0.0;
};

// Wire sizes in bytes:
//   upload: u32 sensor, u32 day, f64 x[M], f64 x_hat[M], f64 r[M], alpha as a ceil(M/8)-byte bitset
//   update: u32 effective day, binary model record, f64 mu[M], f64 sigma[M]
//   alert:  u32 sensor, u32 day, u32 slot, f64 residual
inline std::uint64_t upload_wire_bytes(std::size_t m) { return 8 + 24 * m + (m + 7) / 8; }

inline std::uint64_t update_wire_bytes(const NetworkShape& s) {
    const std::uint64_t m = s.input_dim, h = s.hidden_dim;
    return 4 + 24 + 8 * (2 * h * m + h + m) + 16 * m;
}

inline constexpr std::uint64_t kAlertWireBytes = 20;

inline nlohmann::json to_json_array(const Vector& v) {
    auto a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vector vector_from_json(const nlohmann::json& a) {
    Vector v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

inline nlohmann::json to_json(const UploadMessage& msg) {
    return {{"sensor", msg.sensor_id}, {"day", msg.day_index}, {"x", to_json_array(msg.x)},
            {"x_hat", to_json_array(msg.x_hat)}, {"r", to_json_array(msg.r)}, {"alpha", msg.alpha}};
}

inline UploadMessage upload_from_json(const nlohmann::json& j) {
    UploadMessage msg;
    msg.sensor_id = j.at("sensor").get<int>();
    msg.day_index = j.at("day").get<int>();
    msg.x = vector_from_json(j.at("x"));
    msg.x_hat = vector_from_json(j.at("x_hat"));
    msg.r = vector_from_json(j.at("r"));
    msg.alpha = j.at("alpha").get<AnomalyFlags>();
    return msg;
}

inline nlohmann::json to_json(const ResidualStats& stats) {
    return {{"mu", to_json_array(stats.mu)}, {"sigma", to_json_array(stats.sigma)}};
}

}  // namespace dada
