#pragma once

// Rate function of the small-noise delay equation,
//   I(f) = inf { (1/2) int_0^T |phi|^2 : f' = b(t, f, f(t - tau)) + sigma(t, f, f(t - tau)) phi },
// evaluated on sampled paths and minimized over endpoint events.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "delayldp/core.hpp"

namespace delayldp {

struct RateCertificate {
    double value = 0.0;               // +inf when infeasible
    Control control;                  // least-norm phi*, one value per step
    std::vector<double> residuals;    // |(Id - sigma sigma^+)(f' - b)| per step
    double max_residual = 0.0;
    bool feasible = true;
};

struct RateOptions {
    double feasibility_tolerance = 0.0;  // 0 selects 10 * h
    double rank_cutoff = 1e-10;          // relative to the largest singular value
};

/// Recovers the least-norm control of a sampled path with forward differences.
[[nodiscard]] RateCertificate evaluate_rate(const CoefficientModel& model, const Trajectory& f, const TimeGrid& grid,
                                            const RateOptions& opts = {});

// -----------------------------------------------------------------------------
// Minimization
// -----------------------------------------------------------------------------

enum class GradientMethod { finite_difference, adjoint };

struct MinimizeConfig {
    GradientMethod gradient = GradientMethod::adjoint;
    double initial_penalty = 10.0;
    double penalty_growth = 10.0;
    std::size_t rounds = 6;
    double gradient_tolerance = 1e-6;
    std::size_t max_iterations = 500;  // per round
};

struct MinimizeResult {
    Control control;
    double value = 0.0;       // (1/2) |control|^2
    Trajectory trajectory;    // skeleton path driven by control
    double violation = 0.0;   // distance of the endpoint to the event
    bool converged = true;
    std::string message;
    std::vector<double> round_values;  // value after each penalty round
};

/// J(phi) = (1/2)|phi|^2_{L2} + mu * dist(z^phi(T), event)^2 on the skeleton path z^phi.
class PenaltyObjective {
public:
    PenaltyObjective(const CoefficientModel& model, const InitialSegment& phi, EventSpec event, TimeGrid grid,
                     double penalty);

    [[nodiscard]] double value(const Control& ctrl) const;
    /// Value and exact gradient of the discrete objective by reverse sweep through the RK4 steps.
    double value_and_adjoint_gradient(const Control& ctrl, Control& grad) const;

    void set_penalty(double mu) noexcept { penalty_ = mu; }
    [[nodiscard]] double penalty() const noexcept { return penalty_; }

private:
    const CoefficientModel& model_;
    const InitialSegment& phi_;
    EventSpec event_;
    TimeGrid grid_;
    double penalty_;
};

[[nodiscard]] MinimizeResult minimize_rate(const CoefficientModel& model, const InitialSegment& phi,
                                           const EventSpec& event, const TimeGrid& grid,
                                           const MinimizeConfig& cfg = {});

using ControlObjective = std::function<double(const Control&)>;

/// Central differences per control coordinate. step <= 0 selects 1e-6 * (1 + |phi_k|).
[[nodiscard]] Control fd_gradient(const ControlObjective& objective, const Control& ctrl, double step = 0.0);

}  // namespace delayldp
