#include "delayldp/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "delayldp/rng.hpp"

namespace delayldp {

namespace {

std::size_t aligned_count(double length, double step, const char* what) {
    const double ratio = length / step;
    const double nearest = std::round(ratio);
    const double tol = 1e-9 * (1.0 / step);
    if (std::abs(ratio - nearest) > tol || nearest < 1.0) {
        std::ostringstream msg;
        msg << "grid misalignment: " << what << "/h = " << ratio << " is not a positive integer";
        throw AlignmentError(msg.str());
    }
    return static_cast<std::size_t>(nearest);
}

}  // namespace

TimeGrid make_grid(double horizon, double step, double tau) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("grid: T must be positive and finite");
    if (!(step > 0.0) || !std::isfinite(step)) throw InputError("grid: h must be positive and finite");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("grid: tau must be positive and finite");
    TimeGrid g;
    g.horizon = horizon;
    g.step = step;
    g.tau = tau;
    g.n_steps = aligned_count(horizon, step, "T");
    g.n_history = aligned_count(tau, step, "tau");
    return g;
}

// -----------------------------------------------------------------------------
// InitialSegment
// -----------------------------------------------------------------------------

InitialSegment::InitialSegment(TimeGrid grid, std::size_t dim, std::vector<double> samples)
    : grid_(grid), dim_(dim), samples_(std::move(samples)) {
    if (dim_ == 0) throw InputError("initial segment: dimension must be positive");
    if (samples_.size() != (grid_.n_history + 1) * dim_) {
        throw InputError("initial segment: expected " + std::to_string(grid_.n_history + 1) +
                         " nodes of dimension " + std::to_string(dim_));
    }
}

InitialSegment InitialSegment::constant(const TimeGrid& grid, std::span<const double> value) {
    std::vector<double> s;
    s.reserve((grid.n_history + 1) * value.size());
    for (std::size_t j = 0; j <= grid.n_history; ++j) s.insert(s.end(), value.begin(), value.end());
    return {grid, value.size(), std::move(s)};
}

InitialSegment InitialSegment::from_function(const TimeGrid& grid, std::size_t dim,
                                             const std::function<void(double, std::span<double>)>& fn) {
    std::vector<double> s((grid.n_history + 1) * dim);
    for (std::size_t j = 0; j <= grid.n_history; ++j) {
        const auto i = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(grid.n_history);
        fn(grid.time(i), std::span<double>(s.data() + j * dim, dim));
    }
    return {grid, dim, std::move(s)};
}

std::span<const double> InitialSegment::node(std::ptrdiff_t j) const {
    const auto n = static_cast<std::ptrdiff_t>(grid_.n_history);
    if (j < -n || j > 0) throw RangeError("initial segment: node index out of range");
    return {samples_.data() + static_cast<std::size_t>(j + n) * dim_, dim_};
}

std::vector<double> InitialSegment::at(double t) const {
    const double h = grid_.step;
    const double slack = 1e-12 * std::max(1.0, grid_.tau);
    if (t < -grid_.tau - slack || t > slack) throw RangeError("initial segment: t outside [-tau, 0]");
    const double pos = std::clamp(t / h, -static_cast<double>(grid_.n_history), 0.0);
    auto lo = static_cast<std::ptrdiff_t>(std::floor(pos));
    lo = std::min<std::ptrdiff_t>(lo, -1);
    lo = std::max<std::ptrdiff_t>(lo, -static_cast<std::ptrdiff_t>(grid_.n_history));
    const double w = pos - static_cast<double>(lo);
    auto a = node(lo);
    auto b = node(lo + 1);
    std::vector<double> out(dim_);
    for (std::size_t c = 0; c < dim_; ++c) out[c] = (w == 0.0) ? a[c] : (w == 1.0 ? b[c] : a[c] + w * (b[c] - a[c]));
    return out;
}

double InitialSegment::sup_norm() const noexcept {
    double best = 0.0;
    for (std::size_t j = 0; j <= grid_.n_history; ++j) {
        best = std::max(best, frobenius({samples_.data() + j * dim_, dim_}));
    }
    return best;
}

// -----------------------------------------------------------------------------
// Trajectory
// -----------------------------------------------------------------------------

Trajectory::Trajectory(TimeGrid grid, std::size_t dim, PathOrigin origin)
    : grid_(grid), dim_(dim), values_(grid.total_nodes() * dim, 0.0), origin_(origin) {}

Trajectory::Trajectory(const InitialSegment& phi, PathOrigin origin) : Trajectory(phi.grid(), phi.dim(), origin) {
    std::copy(phi.samples().begin(), phi.samples().end(), values_.begin());
}

Trajectory::Trajectory(TimeGrid grid, std::size_t dim, std::vector<double> values, PathOrigin origin)
    : grid_(grid), dim_(dim), values_(std::move(values)), origin_(origin) {
    if (values_.size() != grid_.total_nodes() * dim_) {
        throw InputError("trajectory: expected " + std::to_string(grid_.total_nodes()) + " nodes of dimension " +
                         std::to_string(dim_));
    }
}

double Trajectory::sup_norm_sq() const noexcept {
    double best = 0.0;
    for (std::size_t k = 0; k < grid_.total_nodes(); ++k) {
        double s = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) s += values_[k * dim_ + c] * values_[k * dim_ + c];
        best = std::max(best, s);
    }
    return best;
}

double Trajectory::sup_norm_forward() const noexcept {
    double best = 0.0;
    for (std::size_t k = 0; k <= grid_.n_steps; ++k) {
        best = std::max(best, frobenius(node(static_cast<std::ptrdiff_t>(k))));
    }
    return best;
}

std::vector<double> eval_path(const Trajectory& traj, double t) {
    const auto& g = traj.grid();
    const double slack = 1e-12 * std::max(1.0, g.horizon + g.tau);
    if (!(t >= -g.tau - slack && t <= g.horizon + slack)) {
        std::ostringstream msg;
        msg << "eval_path: t = " << t << " outside [" << -g.tau << ", " << g.horizon << "]";
        throw RangeError(msg.str());
    }
    const auto lo_idx = -static_cast<std::ptrdiff_t>(g.n_history);
    const auto hi_idx = static_cast<std::ptrdiff_t>(g.n_steps);
    const double pos = t / g.step;
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) <= 1e-12 * std::max(1.0, std::abs(pos))) {
        const auto i = std::clamp(static_cast<std::ptrdiff_t>(nearest), lo_idx, hi_idx);
        auto v = traj.node(i);
        return {v.begin(), v.end()};
    }
    const auto i = std::clamp(static_cast<std::ptrdiff_t>(std::floor(pos)), lo_idx, hi_idx - 1);
    const double w = pos - static_cast<double>(i);
    auto a = traj.node(i);
    auto b = traj.node(i + 1);
    std::vector<double> out(traj.dim());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = a[c] + w * (b[c] - a[c]);
    return out;
}

// -----------------------------------------------------------------------------
// Control
// -----------------------------------------------------------------------------

Control::Control(TimeGrid grid, std::size_t dim) : grid_(grid), dim_(dim), values_(grid.n_steps * dim, 0.0) {}

Control::Control(TimeGrid grid, std::size_t dim, std::vector<double> values)
    : grid_(grid), dim_(dim), values_(std::move(values)) {
    if (values_.size() != grid_.n_steps * dim_) {
        throw InputError("control: expected " + std::to_string(grid_.n_steps) + " steps of dimension " +
                         std::to_string(dim_) + ", got " + std::to_string(values_.size()) + " values");
    }
}

Control Control::constant(const TimeGrid& grid, std::span<const double> value) {
    std::vector<double> v;
    v.reserve(grid.n_steps * value.size());
    for (std::size_t k = 0; k < grid.n_steps; ++k) v.insert(v.end(), value.begin(), value.end());
    return {grid, value.size(), std::move(v)};
}

bool Control::is_zero() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double l2_norm_sq(const Control& ctrl) noexcept {
    double s = 0.0;
    for (double v : ctrl.values()) s += v * v;
    return ctrl.grid().step * s;
}

ControlIntegral op_G(const Control& ctrl) {
    const auto& g = ctrl.grid();
    const std::size_t m = ctrl.dim();
    ControlIntegral out{g, m, std::vector<double>((g.n_steps + 1) * m, 0.0)};
    // Accumulated as sums of phi_k, scaled once per node, so constant controls give c*t_k.
    std::vector<double> running(m, 0.0);
    for (std::size_t k = 0; k < g.n_steps; ++k) {
        auto phi = ctrl.at(k);
        for (std::size_t c = 0; c < m; ++c) {
            running[c] += phi[c];
            out.values[(k + 1) * m + c] = running[c] * g.step;
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// CoefficientModel
// -----------------------------------------------------------------------------

std::vector<double> CoefficientModel::b(double t, std::span<const double> x, std::span<const double> y) const {
    std::vector<double> out(d, 0.0);
    drift(t, x, y, out);
    return out;
}

std::vector<double> CoefficientModel::sigma(double t, std::span<const double> x, std::span<const double> y) const {
    std::vector<double> out(d * m, 0.0);
    diffusion(t, x, y, out);
    return out;
}

void CoefficientModel::validate() const {
    if (d == 0 || m == 0) throw InputError("model: dimensions d and m must be positive");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("model: tau must be positive");
    if (!drift || !diffusion) throw InputError("model: drift and diffusion must be set");
    const auto& c = declared;
    const double ks[] = {c.K1, c.K2, c.K3, c.K4, c.K5, c.K6};
    for (double k : ks) {
        if (!std::isfinite(k) || k < 0.0) throw InputError("model: declared constants K1..K6 must be finite and >= 0");
    }
    if (!std::isfinite(c.q) || c.q < 1.0) throw InputError("model: declared q must be >= 1");
    if (!std::isfinite(c.eta) || c.eta <= 1.0) throw InputError("model: declared eta must be > 1");
}

double frobenius(std::span<const double> a) noexcept {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

// -----------------------------------------------------------------------------
// EventSpec
// -----------------------------------------------------------------------------

bool EventSpec::contains(const Trajectory& path) const {
    if (const auto* tube = std::get_if<TubeExit>(&kind)) {
        if (!tube->reference || !(tube->reference->grid() == path.grid())) {
            throw InputError("tube_exit: reference path must share the grid of the tested path");
        }
        for (std::size_t k = 0; k <= path.grid().n_steps; ++k) {
            const auto i = static_cast<std::ptrdiff_t>(k);
            auto a = path.node(i);
            auto r = tube->reference->node(i);
            double s = 0.0;
            for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - r[c]) * (a[c] - r[c]);
            if (std::sqrt(s) >= tube->radius) return true;
        }
        return false;
    }
    return endpoint_violation(path.node(static_cast<std::ptrdiff_t>(path.grid().n_steps))) == 0.0;
}

double EventSpec::endpoint_violation(std::span<const double> endpoint) const {
    if (const auto* hs = std::get_if<EndpointHalfspace>(&kind)) {
        if (hs->index >= endpoint.size()) throw InputError("halfspace event: coordinate index out of range");
        const double signed_gap = hs->direction * (hs->threshold - endpoint[hs->index]);
        return std::max(0.0, signed_gap);
    }
    if (const auto* ball = std::get_if<EndpointBallExterior>(&kind)) {
        if (ball->center.size() != endpoint.size()) throw InputError("ball event: center dimension mismatch");
        double s = 0.0;
        for (std::size_t c = 0; c < endpoint.size(); ++c) s += (endpoint[c] - ball->center[c]) * (endpoint[c] - ball->center[c]);
        return std::max(0.0, ball->radius - std::sqrt(s));
    }
    throw InputError("endpoint_violation: tube_exit is not an endpoint event");
}

void EventSpec::endpoint_violation_sq_gradient(std::span<const double> endpoint, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double v = endpoint_violation(endpoint);
    if (v == 0.0) return;
    if (const auto* hs = std::get_if<EndpointHalfspace>(&kind)) {
        grad[hs->index] = -2.0 * v * hs->direction;
        return;
    }
    const auto& ball = std::get<EndpointBallExterior>(kind);
    double s = 0.0;
    for (std::size_t c = 0; c < endpoint.size(); ++c) s += (endpoint[c] - ball.center[c]) * (endpoint[c] - ball.center[c]);
    const double r = std::sqrt(s);
    if (r == 0.0) {
        // Any direction is a descent direction at the center; pick the first axis.
        grad[0] = -2.0 * v;
        return;
    }
    for (std::size_t c = 0; c < endpoint.size(); ++c) grad[c] = -2.0 * v * (endpoint[c] - ball.center[c]) / r;
}

// -----------------------------------------------------------------------------
// Assumption checking
// -----------------------------------------------------------------------------

const ConditionRecord& AssumptionReport::condition(const std::string& id) const {
    for (const auto& c : conditions) {
        if (c.id == id) return c;
    }
    throw InputError("assumption report: unknown condition '" + id + "'");
}

bool AssumptionReport::all_pass() const noexcept {
    return std::all_of(conditions.begin(), conditions.end(), [](const ConditionRecord& c) { return c.pass; });
}

namespace {

bool within(double worst, double declared) noexcept {
    return worst <= declared + 1e-9 * std::max(1.0, std::abs(declared));
}

void require_finite(std::span<const double> v, const char* what, double t, std::span<const double> x,
                    std::span<const double> y) {
    for (double e : v) {
        if (!std::isfinite(e)) {
            std::ostringstream msg;
            msg << "model evaluation: non-finite " << what << " at t=" << t << " x=(";
            for (std::size_t c = 0; c < x.size(); ++c) msg << (c ? "," : "") << x[c];
            msg << ") y=(";
            for (std::size_t c = 0; c < y.size(); ++c) msg << (c ? "," : "") << y[c];
            msg << ")";
            throw ModelEvaluationError(msg.str());
        }
    }
}

double pow_norm(std::span<const double> v, double p) noexcept { return std::pow(frobenius(v), p); }

}  // namespace

AssumptionReport check_assumptions(const CoefficientModel& model, const AssumptionSampler& sampler) {
    if (sampler.n_points < 1) throw InputError("check_assumptions: n_points must be >= 1");
    if (!(sampler.radius > 0.0)) throw InputError("check_assumptions: box radius must be positive");
    model.validate();

    const std::size_t d = model.d;
    const std::size_t dm = model.d * model.m;
    const auto& k = model.declared;
    const double R = sampler.radius;

    NormalSource src(RngStream{sampler.seed, 0});
    std::vector<double> x1(d), x2(d), y1(d), y2(d), zero(d, 0.0);
    std::vector<double> b1(d), b2(d), s1(dm), s2(dm), b0(d), s0(dm);
    std::vector<double> dx(d), dy(d), db(d), ds(dm);

    double worst_origin = 0.0, worst_mono = -std::numeric_limits<double>::infinity(), worst_bgrowth = 0.0,
           worst_coercive = -std::numeric_limits<double>::infinity(), worst_sgrowth = 0.0, worst_superlinear = 0.0;

    // Per-sample pieces of the monotone ratio, kept for the eta search:
    // ratio(eta) = (inner + eta * dsig_sq) / denom.
    std::vector<double> mono_inner, mono_dsig, mono_denom;
    mono_inner.reserve(sampler.n_points);
    mono_dsig.reserve(sampler.n_points);
    mono_denom.reserve(sampler.n_points);

    auto draw = [&](std::vector<double>& v) {
        for (auto& e : v) e = R * (2.0 * src.next_uniform() - 1.0);
    };

    const double qm1 = k.q - 1.0;
    for (std::size_t n = 0; n < sampler.n_points; ++n) {
        const double t = sampler.horizon * src.next_uniform();
        draw(x1);
        draw(x2);
        draw(y1);
        draw(y2);

        model.drift(t, x1, y1, b1);
        model.drift(t, x2, y2, b2);
        model.diffusion(t, x1, y1, s1);
        model.diffusion(t, x2, y2, s2);
        model.drift(t, zero, zero, b0);
        model.diffusion(t, zero, zero, s0);
        require_finite(b1, "drift", t, x1, y1);
        require_finite(b2, "drift", t, x2, y2);
        require_finite(s1, "diffusion", t, x1, y1);
        require_finite(s2, "diffusion", t, x2, y2);
        require_finite(b0, "drift", t, zero, zero);
        require_finite(s0, "diffusion", t, zero, zero);

        worst_origin = std::max(worst_origin, frobenius(b0) + frobenius(s0));

        double inner = 0.0, dx_sq = 0.0, dy_sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            dx[c] = x1[c] - x2[c];
            dy[c] = y1[c] - y2[c];
            db[c] = b1[c] - b2[c];
            inner += dx[c] * db[c];
            dx_sq += dx[c] * dx[c];
            dy_sq += dy[c] * dy[c];
        }
        for (std::size_t c = 0; c < dm; ++c) ds[c] = s1[c] - s2[c];
        const double dsig_sq = [&] {
            double s = 0.0;
            for (double v : ds) s += v * v;
            return s;
        }();
        const double denom = dx_sq + dy_sq;
        if (denom > 0.0) {
            worst_mono = std::max(worst_mono, (inner + k.eta * dsig_sq) / denom);
            mono_inner.push_back(inner);
            mono_dsig.push_back(dsig_sq);
            mono_denom.push_back(denom);
        }

        const double weight = 1.0 + pow_norm(x1, qm1) + pow_norm(x2, qm1) + pow_norm(y1, qm1) + pow_norm(y2, qm1);
        const double lip = std::sqrt(dx_sq) + std::sqrt(dy_sq);
        if (lip > 0.0) {
            worst_bgrowth = std::max(worst_bgrowth, frobenius(db) / (weight * lip));
            worst_sgrowth = std::max(worst_sgrowth, std::sqrt(dsig_sq) / (weight * lip));
        }

        double xb = 0.0;
        for (std::size_t c = 0; c < d; ++c) xb += x1[c] * b1[c];
        const double s1_norm = frobenius(s1);
        const double x1_sq = frobenius(x1) * frobenius(x1);
        const double y1_sq = frobenius(y1) * frobenius(y1);
        worst_coercive = std::max(worst_coercive, (xb + 0.5 * k.eta * s1_norm * s1_norm) / (1.0 + x1_sq + y1_sq));
        worst_superlinear = std::max(worst_superlinear, (frobenius(b1) + s1_norm) /
                                                            (1.0 + pow_norm(x1, k.q) + pow_norm(y1, k.q)));
    }
    if (!std::isfinite(worst_mono)) worst_mono = 0.0;
    if (!std::isfinite(worst_coercive)) worst_coercive = 0.0;

    AssumptionReport report;
    report.n_points = sampler.n_points;
    auto add = [&](const char* id, double worst, double declared) {
        report.conditions.push_back({id, worst, declared, within(worst, declared)});
    };
    add(kConditionOrigin, worst_origin, k.K1);
    add(kConditionMonotone, worst_mono, k.K2);
    add(kConditionDriftGrowth, worst_bgrowth, k.K3);
    add(kConditionCoercive, worst_coercive, k.K4);
    add(kConditionDiffusionGrowth, worst_sgrowth, k.K5);
    add(kConditionSuperlinear, worst_superlinear, k.K6);

    // Largest eta in [1, 64] for which the monotone ratio stays under K2.
    auto worst_at = [&](double eta) {
        double w = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mono_inner.size(); ++i) {
            w = std::max(w, (mono_inner[i] + eta * mono_dsig[i]) / mono_denom[i]);
        }
        return mono_inner.empty() ? 0.0 : w;
    };
    constexpr double kEtaLo = 1.0;
    constexpr double kEtaHi = 64.0;
    constexpr double kEtaTol = 1e-3;
    if (within(worst_at(kEtaHi), k.K2)) {
        report.largest_feasible_eta = kEtaHi;
    } else if (!within(worst_at(kEtaLo), k.K2)) {
        report.largest_feasible_eta = kEtaLo;
    } else {
        double lo = kEtaLo, hi = kEtaHi;
        while (hi - lo > kEtaTol) {
            const double mid = 0.5 * (lo + hi);
            (within(worst_at(mid), k.K2) ? lo : hi) = mid;
        }
        report.largest_feasible_eta = lo;
    }
    report.gate_threshold = 2.0 * k.q - 1.0;
    report.theorem_gate_pass = report.largest_feasible_eta > report.gate_threshold;
    return report;
}

}  // namespace delayldp
