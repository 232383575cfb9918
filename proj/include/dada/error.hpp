#pragma once

#include <stdexcept>
#include <string>

namespace dada {

/// Raised when a caller breaks a documented precondition (shape mismatch,
/// empty input, out-of-order slot, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Training produced a non-finite cost.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int epoch, const std::string& detail)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + detail),
          epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// Malformed or incomplete configuration. `field` is a dotted path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& detail)
        : std::runtime_error(field.empty() ? detail : field + ": " + detail), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractViolation(message);
}

}  // namespace dada
