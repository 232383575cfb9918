#pragma once

// Small generators shared by the unit suites. Every helper takes an explicit
// engine so a failing case can be replayed from its seed.

#include <random>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/rng.hpp"

namespace dada::testing {

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

inline ModelParams random_params(Rng& rng, const NetworkShape& shape, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    auto p = ModelParams::zeros(shape);
    for (auto* m : {&p.w_hidden, &p.w_output})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = u(rng);
    for (auto* v : {&p.b_hidden, &p.b_output})
        for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = u(rng);
    return p;
}

inline std::vector<Sample> random_samples(Rng& rng, std::size_t count, Eigen::Index m) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(random_vector(rng, m));
    return out;
}

/// Visits every scalar of a parameter set in a fixed order.
template <typename Fn>
void for_each_entry(ModelParams& p, Fn&& fn) {
    for (auto* m : {&p.w_hidden, &p.w_output})
        for (Eigen::Index i = 0; i < m->size(); ++i) fn(m->data()[i]);
    for (auto* v : {&p.b_hidden, &p.b_output})
        for (Eigen::Index i = 0; i < v->size(); ++i) fn((*v)(i));
}

}  // namespace dada::testing
