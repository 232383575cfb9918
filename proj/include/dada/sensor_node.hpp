#pragma once

// Sensor-side detector. A node only ever sees its own readings and whatever
// the cloud broadcasts to it; it holds no handle to any other sensor.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/detector.hpp"
#include "dada/error.hpp"
#include "dada/messages.hpp"

namespace dada {

enum class DetectionMode { BatchDaily, PerReading };

inline const char* to_string(DetectionMode m) { return m == DetectionMode::BatchDaily ? "batch" : "per_reading"; }

class SensorNode {
public:
    /// `reference` fills not-yet-observed slots in per-reading mode; it defaults
    /// to the model's reconstruction of a flat 0.5 day and is replaced by each
    /// day's reconstruction.
    SensorNode(int sensor_id, ModelParams params, ResidualStats stats, DetectionThreshold threshold,
               DetectionMode mode = DetectionMode::BatchDaily, int first_day = 1,
               std::optional<Vector> reference = std::nullopt)
        : id_(sensor_id),
          params_(std::move(params)),
          stats_(std::move(stats)),
          threshold_(threshold),
          mode_(mode),
          day_(first_day) {
        check_shape(params_);
        threshold_.validate();
        stats_.validate(input_dim());
        buffer_.reserve(input_dim());
        if (reference) {
            require(static_cast<std::size_t>(reference->size()) == input_dim(), "SensorNode: reference length mismatch");
            reference_ = std::move(*reference);
        } else {
            reference_ = forward(params_, Vector::Constant(static_cast<Eigen::Index>(input_dim()), 0.5)).output;
        }
    }

    int id() const { return id_; }
    std::size_t input_dim() const { return static_cast<std::size_t>(params_.w_hidden.cols()); }
    const ModelParams& params() const { return params_; }
    const ResidualStats& stats() const { return stats_; }
    const DetectionThreshold& threshold() const { return threshold_; }
    DetectionMode mode() const { return mode_; }
    const std::vector<double>& day_buffer() const { return buffer_; }
    int current_day() const { return day_; }
    /// Multiply-accumulates spent in inference so far.
    std::uint64_t mac_count() const { return ops_.mac; }

    /// Appends the reading for `slot` (0-based, strictly in order). In
    /// per-reading mode returns an alert when that slot is flagged.
    std::optional<Alert> ingest_reading(double value, std::size_t slot) {
        require(buffer_.size() < input_dim(), "ingest_reading: day buffer is full");
        require(slot == buffer_.size(), "ingest_reading: expected slot " + std::to_string(buffer_.size()) +
                                            ", got " + std::to_string(slot));
        require(std::isfinite(value) && value >= 0.0 && value <= 1.0, "ingest_reading: value outside [0,1]");
        buffer_.push_back(value);
        if (mode_ != DetectionMode::PerReading) return std::nullopt;

        Vector padded = reference_;
        for (std::size_t m = 0; m < buffer_.size(); ++m) padded(static_cast<Eigen::Index>(m)) = buffer_[m];
        const auto out = forward(params_, padded, &ops_).output;
        const auto s = static_cast<Eigen::Index>(slot);
        const double r = value - out(s);
        const double score = deviation_score(r, stats_.mu(s), stats_.sigma(s));
        if (!exceeds(score, threshold_)) return std::nullopt;
        return Alert{id_, day_, static_cast<int>(slot), r, score};
    }

    /// Runs inference and detection on the completed day and empties the buffer.
    UploadMessage end_of_day(int day_index) {
        require(buffer_.size() == input_dim(), "end_of_day: buffer holds " + std::to_string(buffer_.size()) +
                                                   " of " + std::to_string(input_dim()) + " readings");
        UploadMessage msg;
        msg.sensor_id = id_;
        msg.day_index = day_index;
        msg.x = Eigen::Map<const Vector>(buffer_.data(), static_cast<Eigen::Index>(buffer_.size()));
        msg.x_hat = forward(params_, msg.x, &ops_).output;
        msg.r = residual(msg.x, msg.x_hat);
        msg.alpha = detect(msg.r, stats_, threshold_);
        buffer_.clear();
        reference_ = msg.x_hat;
        day_ = day_index + 1;
        return msg;
    }

    /// Swaps in the broadcast parameters and statistics together.
    void apply_update(const ModelUpdate& update) {
        check_shape(update.params);
        require(update.params.shape() == params_.shape(), "apply_update: model shape mismatch");
        update.stats.validate(input_dim());
        params_ = update.params;
        stats_ = update.stats;
    }

private:
    int id_;
    ModelParams params_;
    ResidualStats stats_;
    DetectionThreshold threshold_;
    DetectionMode mode_;
    int day_;
    std::vector<double> buffer_;
    Vector reference_;
    OpCounter ops_;
};

}  // namespace dada
