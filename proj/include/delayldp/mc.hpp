#pragma once

// Small-noise event probabilities by plain and importance-sampled Monte Carlo,
// and the eps-sweep that extracts the exponential decay rate.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "delayldp/core.hpp"
#include "delayldp/rate.hpp"
#include "delayldp/rng.hpp"
#include "delayldp/sdde.hpp"

namespace delayldp {

enum class EstimateMethod { plain, importance };

struct ProbEstimate {
    double p_hat = 0.0;
    double log_p_hat = 0.0;  // -inf with zero hits
    double std_error = 0.0;
    std::size_t n = 0;
    std::size_t hits = 0;
    EstimateMethod method = EstimateMethod::plain;
    double ess = 0.0;  // (sum w)^2 / sum w^2 over hits; equals hits for plain estimates
    std::vector<std::string> warnings;
};

/// Stream for sample `sample_index`: the index is the stream id, so distinct
/// indices under one seed never share draws.
[[nodiscard]] RngStream derive_stream(std::uint64_t seed, std::uint64_t sample_index) noexcept;

/// Plain estimate when `is_control` is empty; otherwise averages 1_event * exp(log_weight)
/// over paths of the controlled dynamics with u = *is_control.
[[nodiscard]] ProbEstimate estimate_prob(const CoefficientModel& model, const InitialSegment& phi, double eps,
                                         const EventSpec& event, std::size_t n_samples, const TimeGrid& grid,
                                         Scheme scheme, std::uint64_t seed,
                                         const std::optional<Control>& is_control = std::nullopt);

enum class SampleBudget { uniform, geometric };

struct SweepConfig {
    std::vector<double> eps_list;  // strictly decreasing
    std::size_t n_per_eps = 100000;
    Scheme scheme = Scheme::tamed_euler;
    std::uint64_t seed = 0;
    bool use_is = true;
    SampleBudget budget = SampleBudget::uniform;
    MinimizeConfig minimize;
};

struct SweepRow {
    double eps = 0.0;
    ProbEstimate estimate;
    double eps_log_p = 0.0;
    double eps_log_p_stderr = 0.0;
    bool used_in_fit = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // decreasing eps
    double extrapolated_rate = 0.0;  // minus the eps -> 0 intercept of eps log p against eps
    double rate_stderr = 0.0;
    double slope = 0.0;
    double variational_value = 0.0;
    double gap = 0.0;  // |extrapolated_rate - variational_value|
    bool variational_converged = true;
    std::vector<std::string> warnings;
};

/// Throws FitError when fewer than three rows have a finite log estimate.
[[nodiscard]] SweepResult epsilon_sweep(const CoefficientModel& model, const InitialSegment& phi,
                                        const EventSpec& event, const TimeGrid& grid, const SweepConfig& cfg);

}  // namespace delayldp
