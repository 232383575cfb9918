#pragma once

// Single-hidden-layer sigmoid autoencoder: forward pass, L2-regularized
// reconstruction cost, backpropagation and full-batch gradient descent.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dada/error.hpp"
#include "dada/rng.hpp"

namespace dada {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One day of normalized readings, entries in [0,1].
using Sample = Vector;

struct NetworkShape {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;

    void validate() const {
        require(input_dim >= 1, "NetworkShape: input_dim must be >= 1");
        require(hidden_dim >= 1, "NetworkShape: hidden_dim must be >= 1");
        require(hidden_dim < input_dim, "NetworkShape: hidden_dim must be < input_dim");
    }

    double compression_ratio() const {
        return 1.0 - static_cast<double>(hidden_dim) / static_cast<double>(input_dim);
    }

    friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Weights and biases of the two affine layers. Also used as the gradient record.
struct ModelParams {
    Matrix w_hidden;  // hidden_dim x input_dim
    Vector b_hidden;  // hidden_dim
    Matrix w_output;  // input_dim x hidden_dim
    Vector b_output;  // input_dim

    static ModelParams zeros(const NetworkShape& shape) {
        const auto m = static_cast<Eigen::Index>(shape.input_dim);
        const auto h = static_cast<Eigen::Index>(shape.hidden_dim);
        return {Matrix::Zero(h, m), Vector::Zero(h), Matrix::Zero(m, h), Vector::Zero(m)};
    }

    NetworkShape shape() const {
        return {static_cast<std::size_t>(w_hidden.cols()), static_cast<std::size_t>(w_hidden.rows())};
    }

    bool consistent() const {
        const auto h = w_hidden.rows();
        const auto m = w_hidden.cols();
        return h >= 1 && m >= 1 && b_hidden.size() == h && w_output.rows() == m && w_output.cols() == h &&
               b_output.size() == m;
    }

    bool all_finite() const {
        return w_hidden.allFinite() && b_hidden.allFinite() && w_output.allFinite() && b_output.allFinite();
    }

    double weight_square_sum() const { return w_hidden.squaredNorm() + w_output.squaredNorm(); }

    double squared_norm() const {
        return weight_square_sum() + b_hidden.squaredNorm() + b_output.squaredNorm();
    }

    ModelParams& operator-=(const ModelParams& other) {
        w_hidden -= other.w_hidden;
        b_hidden -= other.b_hidden;
        w_output -= other.w_output;
        b_output -= other.b_output;
        return *this;
    }

    ModelParams& operator*=(double s) {
        w_hidden *= s;
        b_hidden *= s;
        w_output *= s;
        b_output *= s;
        return *this;
    }

    friend bool operator==(const ModelParams& a, const ModelParams& b) {
        return a.w_hidden.rows() == b.w_hidden.rows() && a.w_hidden.cols() == b.w_hidden.cols() &&
               a.b_hidden.size() == b.b_hidden.size() && a.b_output.size() == b.b_output.size() &&
               a.w_hidden == b.w_hidden && a.b_hidden == b.b_hidden && a.w_output == b.w_output &&
               a.b_output == b.b_output;
    }
};

using ParamGradient = ModelParams;

struct TrainingConfig {
    double lambda = 1e-4;
    double step_size = 0.5;
    int epochs = 500;
    double init_scale = 0.05;
    std::uint64_t seed = 0;
    // Halve the step (at most 20 times per epoch) whenever a step would raise the cost.
    bool halve_on_increase = false;

    void validate() const {
        require(std::isfinite(lambda) && lambda >= 0.0, "TrainingConfig: lambda must be >= 0");
        require(std::isfinite(step_size) && step_size >= 0.0, "TrainingConfig: step_size must be >= 0");
        require(epochs >= 1, "TrainingConfig: epochs must be >= 1");
        require(std::isfinite(init_scale) && init_scale > 0.0, "TrainingConfig: init_scale must be > 0");
    }
};

/// Multiply-accumulate counter for inference instrumentation.
struct OpCounter {
    std::uint64_t mac = 0;
};

inline double sigmoid(double z) noexcept {
    // Clamped so the result stays strictly inside (0,1) even when exp saturates.
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    double y;
    if (z >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        y = e / (1.0 + e);
    }
    return y < lo ? lo : (y > hi ? hi : y);
}

template <typename Derived>
Matrix sigmoid(const Eigen::MatrixBase<Derived>& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

struct Activations {
    Vector hidden;
    Vector output;
};

inline void check_shape(const ModelParams& params) {
    require(params.consistent(), "ModelParams: inconsistent layer shapes");
}

inline Activations forward(const ModelParams& params, const Vector& x, OpCounter* ops = nullptr) {
    check_shape(params);
    require(x.size() == params.w_hidden.cols(), "forward: input length " + std::to_string(x.size()) +
                                                    " does not match input_dim " +
                                                    std::to_string(params.w_hidden.cols()));
    Activations a;
    a.hidden = sigmoid(params.w_hidden * x + params.b_hidden);
    a.output = sigmoid(params.w_output * a.hidden + params.b_output);
    if (ops != nullptr) {
        ops->mac += static_cast<std::uint64_t>(params.w_hidden.size() + params.w_output.size());
    }
    return a;
}

/// Column-stacks samples into an input_dim x T matrix.
inline Matrix pack_samples(std::span<const Sample> samples, Eigen::Index input_dim) {
    require(!samples.empty(), "sample list must be nonempty");
    Matrix x(input_dim, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require(samples[i].size() == input_dim, "sample " + std::to_string(i) + " has length " +
                                                    std::to_string(samples[i].size()) + ", expected " +
                                                    std::to_string(input_dim));
        x.col(static_cast<Eigen::Index>(i)) = samples[i];
    }
    return x;
}

namespace detail {

struct BatchPass {
    Matrix hidden;
    Matrix output;
};

inline BatchPass batch_forward(const ModelParams& p, const Matrix& x) {
    BatchPass pass;
    pass.hidden = sigmoid((p.w_hidden * x).colwise() + p.b_hidden);
    pass.output = sigmoid((p.w_output * pass.hidden).colwise() + p.b_output);
    return pass;
}

inline double cost_from_pass(const ModelParams& p, const Matrix& x, const BatchPass& pass, double lambda) {
    const double t = static_cast<double>(x.cols());
    return 0.5 * (pass.output - x).squaredNorm() / t + 0.5 * lambda * p.weight_square_sum();
}

}  // namespace detail

/// Cost over a packed input_dim x T sample matrix.
inline double cost(const ModelParams& params, const Matrix& x, double lambda) {
    check_shape(params);
    require(x.cols() >= 1, "cost: sample list must be nonempty");
    require(x.rows() == params.w_hidden.cols(), "cost: sample length does not match input_dim");
    return detail::cost_from_pass(params, x, detail::batch_forward(params, x), lambda);
}

inline double cost(const ModelParams& params, std::span<const Sample> samples, double lambda) {
    check_shape(params);
    return cost(params, pack_samples(samples, params.w_hidden.cols()), lambda);
}

struct CostGradient {
    double cost = 0.0;
    ParamGradient gradient;
};

inline CostGradient cost_and_gradient(const ModelParams& p, const Matrix& x, double lambda) {
    check_shape(p);
    require(x.cols() >= 1, "gradient: sample list must be nonempty");
    require(x.rows() == p.w_hidden.cols(), "gradient: sample length does not match input_dim");
    const double t = static_cast<double>(x.cols());
    const auto pass = detail::batch_forward(p, x);

    CostGradient out;
    out.cost = detail::cost_from_pass(p, x, pass, lambda);

    // delta at the output pre-activation, then at the hidden pre-activation
    const Matrix d_out = ((pass.output - x).array() * pass.output.array() * (1.0 - pass.output.array())).matrix() / t;
    const Matrix d_hid =
        ((p.w_output.transpose() * d_out).array() * pass.hidden.array() * (1.0 - pass.hidden.array())).matrix();

    out.gradient.w_output = d_out * pass.hidden.transpose() + lambda * p.w_output;
    out.gradient.b_output = d_out.rowwise().sum();
    out.gradient.w_hidden = d_hid * x.transpose() + lambda * p.w_hidden;
    out.gradient.b_hidden = d_hid.rowwise().sum();
    return out;
}

inline ParamGradient gradient(const ModelParams& params, std::span<const Sample> samples, double lambda) {
    check_shape(params);
    return cost_and_gradient(params, pack_samples(samples, params.w_hidden.cols()), lambda).gradient;
}

/// Weights uniform in [-init_scale, init_scale], biases zero.
inline ModelParams init_params(const NetworkShape& shape, double init_scale, std::uint64_t seed) {
    shape.validate();
    require(std::isfinite(init_scale) && init_scale > 0.0, "init_params: init_scale must be > 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> dist(-init_scale, init_scale);
    auto params = ModelParams::zeros(shape);
    for (Eigen::Index i = 0; i < params.w_hidden.size(); ++i) params.w_hidden.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < params.w_output.size(); ++i) params.w_output.data()[i] = dist(rng);
    return params;
}

struct TrainResult {
    ModelParams params;
    /// cost_trace[0] is the starting cost, cost_trace[e] the cost after epoch e.
    std::vector<double> cost_trace;
    double final_step_size = 0.0;
};

inline TrainResult train(ModelParams params, const Matrix& x, const TrainingConfig& config) {
    config.validate();
    check_shape(params);
    require(x.cols() >= 1, "train: sample list must be nonempty");

    TrainResult result;
    result.cost_trace.reserve(static_cast<std::size_t>(config.epochs) + 1);
    auto current = cost_and_gradient(params, x, config.lambda);
    if (!std::isfinite(current.cost)) throw TrainingDiverged(0, "initial cost is not finite");
    result.cost_trace.push_back(current.cost);

    double step = config.step_size;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        int halvings = 0;
        for (;;) {
            ModelParams candidate = params;
            ParamGradient scaled = current.gradient;
            scaled *= step;
            candidate -= scaled;
            auto next = cost_and_gradient(candidate, x, config.lambda);
            const bool finite = std::isfinite(next.cost) && candidate.all_finite();
            if (!config.halve_on_increase) {
                if (!finite) throw TrainingDiverged(epoch, "cost is " + std::to_string(next.cost));
                params = std::move(candidate);
                current = std::move(next);
                break;
            }
            if (finite && next.cost <= current.cost) {
                params = std::move(candidate);
                current = std::move(next);
                break;
            }
            if (++halvings > 20) {
                if (!finite) throw TrainingDiverged(epoch, "no finite step after 20 halvings");
                // stationary to working precision: keep params, stop shrinking
                break;
            }
            step *= 0.5;
        }
        result.cost_trace.push_back(current.cost);
    }
    result.params = std::move(params);
    result.final_step_size = step;
    return result;
}

inline TrainResult train(const ModelParams& params, std::span<const Sample> samples, const TrainingConfig& config) {
    check_shape(params);
    return train(params, pack_samples(samples, params.w_hidden.cols()), config);
}

// Binary model record, all integers and doubles little-endian:
//   u64 format version (= 1)
//   u64 input_dim, u64 hidden_dim
//   f64 w_hidden[hidden_dim][input_dim]  (row-major)
//   f64 b_hidden[hidden_dim]
//   f64 w_output[input_dim][hidden_dim]  (row-major)
//   f64 b_output[input_dim]
inline constexpr std::uint64_t kModelFormatVersion = 1;

namespace detail {

static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw IoError("model record truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
}

inline double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline void write_params(std::ostream& os, const ModelParams& p) {
    check_shape(p);
    detail::put_u64(os, kModelFormatVersion);
    detail::put_u64(os, static_cast<std::uint64_t>(p.w_hidden.cols()));
    detail::put_u64(os, static_cast<std::uint64_t>(p.w_hidden.rows()));
    for (Eigen::Index i = 0; i < p.w_hidden.rows(); ++i)
        for (Eigen::Index j = 0; j < p.w_hidden.cols(); ++j) detail::put_f64(os, p.w_hidden(i, j));
    for (Eigen::Index i = 0; i < p.b_hidden.size(); ++i) detail::put_f64(os, p.b_hidden(i));
    for (Eigen::Index i = 0; i < p.w_output.rows(); ++i)
        for (Eigen::Index j = 0; j < p.w_output.cols(); ++j) detail::put_f64(os, p.w_output(i, j));
    for (Eigen::Index i = 0; i < p.b_output.size(); ++i) detail::put_f64(os, p.b_output(i));
    if (!os) throw IoError("failed to write model record");
}

inline ModelParams read_params(std::istream& is) {
    const auto version = detail::get_u64(is);
    if (version != kModelFormatVersion) throw IoError("unsupported model format version " + std::to_string(version));
    NetworkShape shape{detail::get_u64(is), detail::get_u64(is)};
    if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.input_dim > (1u << 20) ||
        shape.hidden_dim > (1u << 20))
        throw IoError("model record has invalid shape");
    auto p = ModelParams::zeros(shape);
    for (Eigen::Index i = 0; i < p.w_hidden.rows(); ++i)
        for (Eigen::Index j = 0; j < p.w_hidden.cols(); ++j) p.w_hidden(i, j) = detail::get_f64(is);
    for (Eigen::Index i = 0; i < p.b_hidden.size(); ++i) p.b_hidden(i) = detail::get_f64(is);
    for (Eigen::Index i = 0; i < p.w_output.rows(); ++i)
        for (Eigen::Index j = 0; j < p.w_output.cols(); ++j) p.w_output(i, j) = detail::get_f64(is);
    for (Eigen::Index i = 0; i < p.b_output.size(); ++i) p.b_output(i) = detail::get_f64(is);
    return p;
}

}  // namespace dada
