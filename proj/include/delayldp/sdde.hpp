#pragma once

// Small-noise SDDE integrators
//   dX = b(t, X(t), X(t - tau)) dt + sqrt(eps) sigma(t, X(t), X(t - tau)) dW
// and the controlled variant with extra drift sigma * u.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "delayldp/core.hpp"
#include "delayldp/rng.hpp"

namespace delayldp {

enum class Scheme { euler, tamed_euler };

/// Controlled path plus its Girsanov log-likelihood ratio
/// -(1/sqrt eps) sum u_k . dW_k - (1/(2 eps)) h sum |u_k|^2.
struct ControlledRun {
    Trajectory trajectory;
    double log_weight = 0.0;  // NaN when eps == 0 and the control is nonzero
};

/// Blow-up threshold on |X|.
inline constexpr double kBlowUpThreshold = 1e12;

/// One sample path. Increment k uses normals k*m .. k*m+m-1 of `rng`.
[[nodiscard]] Trajectory simulate(const CoefficientModel& model, const InitialSegment& phi, double eps,
                                  const TimeGrid& grid, Scheme scheme, const RngStream& rng);

/// Controlled path driven by the same increments; ctrl == 0 reproduces simulate() bit for bit.
[[nodiscard]] ControlledRun simulate_controlled(const CoefficientModel& model, const InitialSegment& phi, double eps,
                                                const Control& ctrl, const TimeGrid& grid, Scheme scheme,
                                                const RngStream& rng);

struct MomentRow {
    double eps = 0.0;
    double p = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

struct MomentSweepResult {
    std::vector<MomentRow> rows;
    bool hypothesis_ok = true;  // p in [2, eta + 1) and every eps in (0, 1/2)
    std::vector<std::string> warnings;
};

/// Monte Carlo estimate of E[sup_{[0,T]} |Y|^p] per eps. Sample i uses stream (seed, i)
/// at every eps. `ctrl` selects the controlled dynamics (zero control when absent).
[[nodiscard]] MomentSweepResult moment_sweep(const CoefficientModel& model, const InitialSegment& phi,
                                             const std::vector<double>& eps_list, double p, std::size_t n_samples,
                                             const TimeGrid& grid, Scheme scheme, std::uint64_t seed,
                                             const std::optional<Control>& ctrl = std::nullopt);

}  // namespace delayldp
