#include "delayldp/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace delayldp {

namespace {

constexpr double kBlowUp = 1e12;

void check_inputs(const CoefficientModel& model, const InitialSegment& phi, const Control& ctrl, const TimeGrid& grid) {
    if (std::abs(model.tau - grid.tau) > 1e-12 * std::max(1.0, grid.tau)) {
        throw InputError("skeleton: model tau does not match the grid's tau");
    }
    if (!(phi.grid() == grid)) throw InputError("skeleton: initial segment is on a different grid");
    if (!(ctrl.grid() == grid)) throw InputError("skeleton: control is on a different grid");
    if (phi.dim() != model.d) throw InputError("skeleton: initial segment dimension differs from model d");
    if (ctrl.dim() != model.m) throw InputError("skeleton: control dimension differs from model m");
}

void check_node(const Trajectory& z, std::size_t k) {
    for (double v : z.node(static_cast<std::ptrdiff_t>(k))) {
        if (!std::isfinite(v) || std::abs(v) > kBlowUp) {
            std::ostringstream msg;
            msg << "skeleton blow-up at node " << k << " (t = " << z.grid().time(static_cast<std::ptrdiff_t>(k)) << ")";
            throw BlowUpError(msg.str(), k);
        }
    }
}

/// Scratch space for one classical RK4 step of a delay equation.
struct Rk4Work {
    explicit Rk4Work(std::size_t d)
        : k1(d), k2(d), k3(d), k4(d), stage(d), delay_mid(d) {}
    std::vector<double> k1, k2, k3, k4, stage, delay_mid;
};

// Advances node k -> k+1. rhs(stage_index, t, x, y, out) evaluates the vector field;
// delayed arguments at stage times are linear interpolants of the computed path,
// which is exact node lookups at t_k - tau and t_{k+1} - tau and a mean at the midpoint.
template <class Rhs>
void rk4_step(Trajectory& z, std::size_t k, Rk4Work& w, Rhs&& rhs) {
    const auto& g = z.grid();
    const std::size_t d = z.dim();
    const double h = g.step;
    const auto i = static_cast<std::ptrdiff_t>(k);
    const auto lag = static_cast<std::ptrdiff_t>(g.n_history);
    const double t = g.time(i);
    auto x = z.node(i);
    std::span<const double> delay_lo = z.node(i - lag);
    std::span<const double> delay_hi = z.node(i - lag + 1);
    for (std::size_t c = 0; c < d; ++c) w.delay_mid[c] = 0.5 * (delay_lo[c] + delay_hi[c]);

    rhs(0, t, std::span<const double>(x), delay_lo, std::span<double>(w.k1));
    for (std::size_t c = 0; c < d; ++c) w.stage[c] = x[c] + 0.5 * h * w.k1[c];
    rhs(1, t + 0.5 * h, std::span<const double>(w.stage), std::span<const double>(w.delay_mid), std::span<double>(w.k2));
    for (std::size_t c = 0; c < d; ++c) w.stage[c] = x[c] + 0.5 * h * w.k2[c];
    rhs(2, t + 0.5 * h, std::span<const double>(w.stage), std::span<const double>(w.delay_mid), std::span<double>(w.k3));
    for (std::size_t c = 0; c < d; ++c) w.stage[c] = x[c] + h * w.k3[c];
    rhs(3, t + h, std::span<const double>(w.stage), delay_hi, std::span<double>(w.k4));

    auto next = z.node(i + 1);
    for (std::size_t c = 0; c < d; ++c) {
        next[c] = x[c] + (h / 6.0) * (w.k1[c] + 2.0 * w.k2[c] + 2.0 * w.k3[c] + w.k4[c]);
    }
}

Trajectory solve_rk4(const CoefficientModel& model, const InitialSegment& phi, const Control& ctrl, const TimeGrid& grid) {
    Trajectory z(phi, PathOrigin::skeleton);
    const std::size_t d = model.d;
    const std::size_t m = model.m;
    Rk4Work w(d);
    std::vector<double> sig(d * m);
    std::span<const double> u;
    auto rhs = [&](int, double t, std::span<const double> x, std::span<const double> y, std::span<double> out) {
        model.drift(t, x, y, out);
        model.diffusion(t, x, y, sig);
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < m; ++c) s += sig[r * m + c] * u[c];
            out[r] += s;
        }
    };
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        u = ctrl.at(k);
        rk4_step(z, k, w, rhs);
        check_node(z, k + 1);
    }
    return z;
}

double window_sup_diff(const Trajectory& a, const Trajectory& b, std::size_t lo, std::size_t hi) {
    double best = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        auto x = a.node(i);
        auto y = b.node(i);
        double s = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) s += (x[c] - y[c]) * (x[c] - y[c]);
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

// One application of the frozen-diffusion map on nodes (start, end]: integrates
// u' = b(t, u, u(t - tau)) + sigma_n(t, zeta(t), zeta(t - tau)) phi(t) with RK4,
// where zeta's stage values are linear interpolants of its nodes.
void apply_frozen_map(const CoefficientModel& truncated, const Control& ctrl, const Trajectory& zeta, Trajectory& u,
                      std::size_t start, std::size_t end, Rk4Work& w) {
    const auto& g = u.grid();
    const std::size_t d = truncated.d;
    const std::size_t m = truncated.m;
    const auto lag = static_cast<std::ptrdiff_t>(g.n_history);
    std::vector<double> sig(d * m), forcing(4 * d), zx(d), zy(d);
    for (std::size_t k = start; k < end; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        const double t = g.time(i);
        const double h = g.step;
        auto phi_k = ctrl.at(k);
        auto zk = zeta.node(i), zk1 = zeta.node(i + 1);
        auto yk = zeta.node(i - lag), yk1 = zeta.node(i - lag + 1);
        // Stage forcing terms; stages 1 and 2 share the midpoint.
        for (int s = 0; s < 4; ++s) {
            const double frac = (s == 0) ? 0.0 : (s == 3 ? 1.0 : 0.5);
            for (std::size_t c = 0; c < d; ++c) {
                zx[c] = zk[c] + frac * (zk1[c] - zk[c]);
                zy[c] = yk[c] + frac * (yk1[c] - yk[c]);
            }
            truncated.diffusion(t + frac * h, zx, zy, sig);
            for (std::size_t r = 0; r < d; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < m; ++c) acc += sig[r * m + c] * phi_k[c];
                forcing[static_cast<std::size_t>(s) * d + r] = acc;
            }
        }
        rk4_step(u, k, w, [&](int s, double ts, std::span<const double> x, std::span<const double> y, std::span<double> out) {
            truncated.drift(ts, x, y, out);
            for (std::size_t r = 0; r < d; ++r) out[r] += forcing[static_cast<std::size_t>(s) * d + r];
        });
        check_node(u, k + 1);
    }
}

Trajectory solve_picard(const CoefficientModel& model, const InitialSegment& phi, const Control& ctrl,
                        const TimeGrid& grid, const PicardOptions& opt) {
    double level = opt.level;
    if (level <= 0.0) level = 2.0 * std::sqrt(apriori_bound(model, phi, ctrl));
    level = std::max(level, 1.0);
    if (!(opt.tolerance > 0.0)) throw InputError("picard: tolerance must be positive");
    const CoefficientModel truncated = truncate_sigma(model, level);

    const std::size_t n = grid.n_steps;
    Trajectory z(phi, PathOrigin::skeleton);
    Rk4Work w(model.d);

    std::size_t start = 0;
    std::size_t window = n;
    while (start < n) {
        const std::size_t end = std::min(n, start + window);
        // Initial guess on the window: hold the last accepted value.
        for (std::size_t k = start + 1; k <= end; ++k) {
            auto dst = z.node(static_cast<std::ptrdiff_t>(k));
            auto src = z.node(static_cast<std::ptrdiff_t>(start));
            std::copy(src.begin(), src.end(), dst.begin());
        }
        Trajectory next = z;
        double previous = -1.0;
        std::size_t growth = 0;
        bool converged = false;
        bool shrink = false;
        for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
            apply_frozen_map(truncated, ctrl, z, next, start, end, w);
            const double update = window_sup_diff(next, z, start + 1, end);
            std::swap(z, next);
            if (update <= opt.tolerance) {
                converged = true;
                break;
            }
            if (previous >= 0.0) {
                const double factor = update / previous;
                growth = factor > 1.0 ? growth + 1 : 0;
                if (growth >= 3 && end - start <= 1) {
                    std::ostringstream msg;
                    msg << "picard iteration diverges on window starting at t = " << grid.time(static_cast<std::ptrdiff_t>(start));
                    throw DivergenceError(msg.str());
                }
                if (factor >= 0.9 && sweep >= 2 && end - start > 1) {
                    shrink = true;
                    break;
                }
            }
            previous = update;
        }
        if (shrink) {
            window = std::max<std::size_t>(1, (end - start) / 2);
            continue;
        }
        if (!converged) throw DivergenceError("picard iteration did not reach tolerance within max_sweeps");
        start = end;
    }

    const auto lag = static_cast<std::ptrdiff_t>(grid.n_history);
    for (std::size_t k = 0; k <= n; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        const double reach = std::max(frobenius(z.node(i)), frobenius(z.node(i - lag)));
        if (reach > level) {
            std::ostringstream msg;
            msg << "picard: truncation active at t = " << grid.time(i) << " (|z| = " << reach << " > n = " << level
                << "); increase n";
            throw TruncationActiveError(msg.str());
        }
    }
    return z;
}

}  // namespace

Trajectory solve_skeleton(const CoefficientModel& model, const InitialSegment& phi, const Control& ctrl,
                          const TimeGrid& grid, const SkeletonConfig& cfg) {
    check_inputs(model, phi, ctrl, grid);
    if (cfg.method == SkeletonMethod::picard_truncated) return solve_picard(model, phi, ctrl, grid, cfg.picard);
    return solve_rk4(model, phi, ctrl, grid);
}

double truncation_factor(double x_norm, double y_norm, double level) noexcept {
    const double n = level;
    if (x_norm > 2.0 * n || y_norm > 2.0 * n) return 0.0;
    const double fx = x_norm <= n ? 1.0 : 2.0 - x_norm / n;
    const double fy = y_norm <= n ? 1.0 : 2.0 - y_norm / n;
    return fx * fy;
}

CoefficientModel truncate_sigma(const CoefficientModel& model, double level) {
    if (!(level >= 1.0)) throw InputError("truncate_sigma: level must be >= 1");
    CoefficientModel out = model;
    out.diffusion = [inner = model.diffusion, level](double t, std::span<const double> x, std::span<const double> y,
                                                      std::span<double> res) {
        const double f = truncation_factor(frobenius(x), frobenius(y), level);
        if (f == 0.0) {
            std::fill(res.begin(), res.end(), 0.0);
            return;
        }
        inner(t, x, y, res);
        if (f != 1.0) {
            for (auto& v : res) v *= f;
        }
    };
    return out;
}

double apriori_bound(const CoefficientModel& model, const InitialSegment& phi, const Control& ctrl) {
    const double k4 = model.declared.K4;
    const double eta = model.declared.eta;
    if (!(eta > 0.0)) throw InputError("apriori_bound: model must declare eta > 0");
    const double horizon = ctrl.grid().horizon;
    const double x0 = frobenius(phi.node(0));
    return (x0 * x0 + 2.0 * k4 * horizon) * std::exp(4.0 * k4 * horizon + l2_norm_sq(ctrl) / eta);
}

}  // namespace delayldp
