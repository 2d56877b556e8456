#pragma once

// Deterministic controlled delay ODE
//   z'(t) = b(t, z(t), z(t - tau)) + sigma(t, z(t), z(t - tau)) phi(t),  z = phi_0 on [-tau, 0].

#include <cstddef>

#include "delayldp/core.hpp"

namespace delayldp {

enum class SkeletonMethod { steps_rk4, picard_truncated };

struct PicardOptions {
    double level = 0.0;  // truncation level n; 0 selects 2*sqrt(apriori_bound)
    std::size_t max_sweeps = 200;
    double tolerance = 1e-10;
};

struct SkeletonConfig {
    SkeletonMethod method = SkeletonMethod::steps_rk4;
    PicardOptions picard;
};

/// Solves the skeleton equation on `grid`. Throws BlowUpError, DivergenceError,
/// TruncationActiveError (picard only), or InputError on mismatched inputs.
[[nodiscard]] Trajectory solve_skeleton(const CoefficientModel& model, const InitialSegment& phi, const Control& ctrl,
                                        const TimeGrid& grid, const SkeletonConfig& cfg = {});

/// sigma multiplied by the piecewise-linear cutoff that vanishes once |x| or |y| exceeds 2n.
[[nodiscard]] CoefficientModel truncate_sigma(const CoefficientModel& model, double level);

/// The factor applied to sigma by truncate_sigma at (|x|, |y|).
[[nodiscard]] double truncation_factor(double x_norm, double y_norm, double level) noexcept;

/// (|phi(0)|^2 + 2 K4 T) * exp(4 K4 T + |ctrl|_{L2}^2 / eta), a bound on sup |z|^2.
[[nodiscard]] double apriori_bound(const CoefficientModel& model, const InitialSegment& phi, const Control& ctrl);

}  // namespace delayldp
