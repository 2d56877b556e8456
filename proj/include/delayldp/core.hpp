#pragma once

// Foundational types: time grids, initial segments, sampled paths, piecewise
// constant controls, coefficient models and deviation events.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "delayldp/errors.hpp"

namespace delayldp {

// =============================================================================
// Grid
// =============================================================================

/// Uniform grid on [-tau, T] with tau and T both whole multiples of the step.
struct TimeGrid {
    double horizon = 0.0;
    double step = 0.0;
    double tau = 0.0;
    std::size_t n_steps = 0;
    std::size_t n_history = 0;

    /// Time of node `i`, where i ranges over [-n_history, n_steps].
    [[nodiscard]] double time(std::ptrdiff_t i) const noexcept { return static_cast<double>(i) * step; }
    [[nodiscard]] std::size_t total_nodes() const noexcept { return n_history + n_steps + 1; }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Throws AlignmentError when tau/h or T/h is not integral.
[[nodiscard]] TimeGrid make_grid(double horizon, double step, double tau);

// =============================================================================
// Paths
// =============================================================================

/// phi on [-tau, 0], stored at the grid's history nodes.
class InitialSegment {
public:
    InitialSegment(TimeGrid grid, std::size_t dim, std::vector<double> samples);

    static InitialSegment constant(const TimeGrid& grid, std::span<const double> value);
    static InitialSegment from_function(const TimeGrid& grid, std::size_t dim,
                                        const std::function<void(double, std::span<double>)>& fn);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    /// Sample at history node j in [-n_history, 0].
    [[nodiscard]] std::span<const double> node(std::ptrdiff_t j) const;
    [[nodiscard]] std::span<const double> samples() const noexcept { return samples_; }
    /// Linear interpolation on [-tau, 0].
    [[nodiscard]] std::vector<double> at(double t) const;
    /// max over [-tau, 0] of |phi|.
    [[nodiscard]] double sup_norm() const noexcept;

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::vector<double> samples_;
};

enum class PathOrigin { skeleton, sdde, controlled };

/// Sampled path on [-tau, T]. Node i (i in [-n_history, n_steps]) sits at t = i*h.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(TimeGrid grid, std::size_t dim, PathOrigin origin);
    /// Path whose history nodes are copied from phi and whose future nodes are zero.
    Trajectory(const InitialSegment& phi, PathOrigin origin);
    Trajectory(TimeGrid grid, std::size_t dim, std::vector<double> values, PathOrigin origin);

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] PathOrigin origin() const noexcept { return origin_; }

    [[nodiscard]] std::span<const double> node(std::ptrdiff_t i) const noexcept {
        return {values_.data() + offset(i), dim_};
    }
    [[nodiscard]] std::span<double> node(std::ptrdiff_t i) noexcept {
        return {values_.data() + offset(i), dim_};
    }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    /// max over [-tau, T] of |f(t)|^2.
    [[nodiscard]] double sup_norm_sq() const noexcept;
    /// max over [0, T] of |f(t)|.
    [[nodiscard]] double sup_norm_forward() const noexcept;

private:
    [[nodiscard]] std::size_t offset(std::ptrdiff_t i) const noexcept {
        return static_cast<std::size_t>(i + static_cast<std::ptrdiff_t>(grid_.n_history)) * dim_;
    }

    TimeGrid grid_;
    std::size_t dim_ = 0;
    std::vector<double> values_;
    PathOrigin origin_ = PathOrigin::skeleton;
};

/// Linear interpolation of a path; throws RangeError outside [-tau, T].
[[nodiscard]] std::vector<double> eval_path(const Trajectory& traj, double t);

// =============================================================================
// Controls
// =============================================================================

/// Piecewise-constant R^m valued function: value k holds on [t_k, t_{k+1}).
class Control {
public:
    Control() = default;
    Control(TimeGrid grid, std::size_t dim);
    Control(TimeGrid grid, std::size_t dim, std::vector<double> values);

    static Control constant(const TimeGrid& grid, std::span<const double> value);

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> at(std::size_t k) const noexcept {
        return {values_.data() + k * dim_, dim_};
    }
    [[nodiscard]] std::span<double> at(std::size_t k) noexcept { return {values_.data() + k * dim_, dim_}; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] bool is_zero() const noexcept;

private:
    TimeGrid grid_;
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

/// h * sum_k |phi_k|^2, the squared L2 norm on [0, T].
[[nodiscard]] double l2_norm_sq(const Control& ctrl) noexcept;

/// Node values of t -> int_0^t phi(s) ds on [0, T].
struct ControlIntegral {
    TimeGrid grid;
    std::size_t dim = 0;
    std::vector<double> values;  // (n_steps + 1) * dim

    [[nodiscard]] std::span<const double> node(std::size_t k) const noexcept {
        return {values.data() + k * dim, dim};
    }
};

/// The integral operator G(phi)(t) = int_0^t phi(s) ds, exact for piecewise constant phi.
[[nodiscard]] ControlIntegral op_G(const Control& ctrl);

// =============================================================================
// Coefficient models
// =============================================================================

/// Declared constants of the coefficient class.
struct DeclaredConstants {
    double q = 1.0;
    double eta = 2.0;
    double K1 = 0.0;
    double K2 = 0.0;
    double K3 = 0.0;
    double K4 = 0.0;
    double K5 = 0.0;
    double K6 = 0.0;
};

/// Writes b(t, x, y) into out (size d).
using DriftFn = std::function<void(double, std::span<const double>, std::span<const double>, std::span<double>)>;
/// Writes sigma(t, x, y) into out (size d*m, row-major).
using DiffusionFn = DriftFn;

struct CoefficientModel {
    std::string name;
    std::size_t d = 1;
    std::size_t m = 1;
    double tau = 1.0;
    DriftFn drift;
    DiffusionFn diffusion;
    DeclaredConstants declared;

    [[nodiscard]] std::vector<double> b(double t, std::span<const double> x, std::span<const double> y) const;
    [[nodiscard]] std::vector<double> sigma(double t, std::span<const double> x, std::span<const double> y) const;
    /// Throws InputError when dimensions or declared constants are unusable.
    void validate() const;
};

/// |A|, the Frobenius norm of a flat matrix or the Euclidean norm of a vector.
[[nodiscard]] double frobenius(std::span<const double> a) noexcept;

// =============================================================================
// Events
// =============================================================================

/// X_index(T) >= threshold (direction +1) or X_index(T) <= threshold (direction -1).
struct EndpointHalfspace {
    std::size_t index = 0;
    double threshold = 0.0;
    int direction = +1;
};

/// |X(T) - center| >= radius.
struct EndpointBallExterior {
    std::vector<double> center;
    double radius = 0.0;
};

/// sup_{t in [0,T]} |X(t) - reference(t)| >= radius.
struct TubeExit {
    std::shared_ptr<const Trajectory> reference;
    double radius = 0.0;
};

struct EventSpec {
    std::variant<EndpointHalfspace, EndpointBallExterior, TubeExit> kind;

    [[nodiscard]] bool contains(const Trajectory& path) const;
    /// Distance from an endpoint to the event set (0 inside). Endpoint events only.
    [[nodiscard]] double endpoint_violation(std::span<const double> endpoint) const;
    /// Gradient of endpoint_violation^2 with respect to the endpoint.
    void endpoint_violation_sq_gradient(std::span<const double> endpoint, std::span<double> grad) const;
    [[nodiscard]] bool is_endpoint_event() const noexcept { return !std::holds_alternative<TubeExit>(kind); }
};

// =============================================================================
// Assumption checking
// =============================================================================

struct AssumptionSampler {
    std::size_t n_points = 100000;
    double radius = 5.0;
    std::uint64_t seed = 0;
    double horizon = 1.0;  // t is drawn from [0, horizon]
};

struct ConditionRecord {
    std::string id;
    double worst_ratio = 0.0;
    double declared = 0.0;
    bool pass = true;
};

struct AssumptionReport {
    std::vector<ConditionRecord> conditions;
    double largest_feasible_eta = 1.0;
    double gate_threshold = 1.0;  // 2q - 1
    bool theorem_gate_pass = false;
    std::size_t n_points = 0;

    [[nodiscard]] const ConditionRecord& condition(const std::string& id) const;
    [[nodiscard]] bool all_pass() const noexcept;
};

/// Condition ids, in report order.
inline constexpr const char* kConditionOrigin = "bounded_at_origin";
inline constexpr const char* kConditionMonotone = "monotone";
inline constexpr const char* kConditionDriftGrowth = "drift_poly_growth";
inline constexpr const char* kConditionCoercive = "coercivity";
inline constexpr const char* kConditionDiffusionGrowth = "diffusion_poly_growth";
inline constexpr const char* kConditionSuperlinear = "superlinear_bound";

/// Empirical check of the coefficient class by sampled worst-case ratios.
[[nodiscard]] AssumptionReport check_assumptions(const CoefficientModel& model, const AssumptionSampler& sampler);

}  // namespace delayldp
