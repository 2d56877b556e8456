#pragma once

// Small models and helpers shared by the test binaries.

#include <cmath>
#include <span>
#include <vector>

#include "delayldp/core.hpp"

namespace delayldp::test {

inline CoefficientModel scalar_model(double tau, DriftFn b, DiffusionFn s, DeclaredConstants c = {}) {
    CoefficientModel model;
    model.name = "test";
    model.d = 1;
    model.m = 1;
    model.tau = tau;
    model.drift = std::move(b);
    model.diffusion = std::move(s);
    model.declared = c;
    return model;
}

/// b = 0, sigma = s0.
inline CoefficientModel additive(double tau, double s0 = 1.0) {
    return scalar_model(
        tau, [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; },
        [s0](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = s0; },
        DeclaredConstants{1.0, 2.0, s0, 1.0, 1.0, s0 * s0, 1.0, s0});
}

/// b = 0, sigma = 0.
inline CoefficientModel frozen(double tau) {
    return scalar_model(
        tau, [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; },
        [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; },
        DeclaredConstants{1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
}

/// b = y (pure delay feedback), sigma = 0.
inline CoefficientModel delay_feedback(double tau) {
    return scalar_model(
        tau, [](double, std::span<const double>, std::span<const double> y, std::span<double> out) { out[0] = y[0]; },
        [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; },
        DeclaredConstants{1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0});
}

/// b = -x, sigma = s0.
inline CoefficientModel decay(double tau, double s0 = 0.0) {
    return scalar_model(
        tau, [](double, std::span<const double> x, std::span<const double>, std::span<double> out) { out[0] = -x[0]; },
        [s0](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = s0; },
        DeclaredConstants{1.0, 2.0, s0, 0.5, 1.0, 1.0, 1.0, 1.0});
}

/// b = -x^3, sigma = 0.
inline CoefficientModel cubic_sink(double tau) {
    return scalar_model(
        tau, [](double, std::span<const double> x, std::span<const double>, std::span<double> out) { out[0] = -x[0] * x[0] * x[0]; },
        [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; },
        DeclaredConstants{3.0, 6.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0});
}

inline InitialSegment constant_phi(const TimeGrid& g, double v) {
    const double value[] = {v};
    return InitialSegment::constant(g, value);
}

inline Control constant_control(const TimeGrid& g, double v) {
    const double value[] = {v};
    return Control::constant(g, value);
}

inline double endpoint(const Trajectory& z) { return z.node(static_cast<std::ptrdiff_t>(z.grid().n_steps))[0]; }

}  // namespace delayldp::test
