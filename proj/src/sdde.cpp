#include "delayldp/sdde.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "delayldp/parallel.hpp"

namespace delayldp {

namespace {

void check_inputs(const CoefficientModel& model, const InitialSegment& phi, double eps, const TimeGrid& grid) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw InputError("simulate: eps must be finite and >= 0");
    if (std::abs(model.tau - grid.tau) > 1e-12 * std::max(1.0, grid.tau)) {
        throw InputError("simulate: model tau does not match the grid's tau");
    }
    if (!(phi.grid() == grid)) throw InputError("simulate: initial segment is on a different grid");
    if (phi.dim() != model.d) throw InputError("simulate: initial segment dimension differs from model d");
}

// Shared stepping loop. With a control, the noise seen by sigma is
// sqrt(eps) dW + u h, i.e. the uncontrolled scheme driven by shifted increments.
ControlledRun integrate(const CoefficientModel& model, const InitialSegment& phi, double eps, const Control* ctrl,
                        const TimeGrid& grid, Scheme scheme, const RngStream& rng, PathOrigin origin) {
    const std::size_t d = model.d;
    const std::size_t m = model.m;
    const double h = grid.step;
    const double sqrt_h = std::sqrt(h);
    const double sqrt_eps = std::sqrt(eps);
    const auto lag = static_cast<std::ptrdiff_t>(grid.n_history);
    const bool controlled = ctrl != nullptr && !ctrl->is_zero();

    ControlledRun run{Trajectory(phi, origin), 0.0};
    Trajectory& x = run.trajectory;
    NormalSource normals(rng);
    std::vector<double> b(d), sig(d * m), noise(m), dw(m);
    CompensatedSum cross;   // sum u . dW
    CompensatedSum energy;  // sum |u|^2

    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        const double t = grid.time(i);
        auto cur = x.node(i);
        auto delayed = x.node(i - lag);
        model.drift(t, cur, delayed, b);
        model.diffusion(t, cur, delayed, sig);

        for (std::size_t c = 0; c < m; ++c) {
            dw[c] = sqrt_h * normals.next_normal();
            noise[c] = sqrt_eps * dw[c];
        }
        if (controlled) {
            auto u = ctrl->at(k);
            for (std::size_t c = 0; c < m; ++c) {
                noise[c] += u[c] * h;
                cross.add(u[c] * dw[c]);
                energy.add(u[c] * u[c]);
            }
        }

        double drift_scale = h;
        double diffusion_scale = 1.0;
        if (scheme == Scheme::tamed_euler) {
            const double b_norm = frobenius(b);
            const double s_norm = frobenius(sig);
            drift_scale = h / (1.0 + h * b_norm);
            diffusion_scale = 1.0 / (1.0 + h * s_norm * s_norm);
        }

        auto next = x.node(i + 1);
        bool bad = false;
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < m; ++c) s += sig[r * m + c] * noise[c];
            next[r] = cur[r] + drift_scale * b[r] + diffusion_scale * s;
            bad = bad || !std::isfinite(next[r]) || std::abs(next[r]) > kBlowUpThreshold;
        }
        if (bad) {
            std::ostringstream msg;
            msg << "simulate: blow-up at step " << k + 1 << " (t = " << grid.time(i + 1) << ")";
            throw BlowUpError(msg.str(), k + 1);
        }
    }

    if (controlled) {
        run.log_weight = (eps == 0.0) ? std::numeric_limits<double>::quiet_NaN()
                                      : -cross.value() / sqrt_eps - h * energy.value() / (2.0 * eps);
    }
    return run;
}

}  // namespace

Trajectory simulate(const CoefficientModel& model, const InitialSegment& phi, double eps, const TimeGrid& grid,
                    Scheme scheme, const RngStream& rng) {
    check_inputs(model, phi, eps, grid);
    return integrate(model, phi, eps, nullptr, grid, scheme, rng, PathOrigin::sdde).trajectory;
}

ControlledRun simulate_controlled(const CoefficientModel& model, const InitialSegment& phi, double eps,
                                  const Control& ctrl, const TimeGrid& grid, Scheme scheme, const RngStream& rng) {
    check_inputs(model, phi, eps, grid);
    if (!(ctrl.grid() == grid)) throw InputError("simulate_controlled: control is on a different grid");
    if (ctrl.dim() != model.m) throw InputError("simulate_controlled: control dimension differs from model m");
    return integrate(model, phi, eps, &ctrl, grid, scheme, rng, PathOrigin::controlled);
}

MomentSweepResult moment_sweep(const CoefficientModel& model, const InitialSegment& phi,
                               const std::vector<double>& eps_list, double p, std::size_t n_samples,
                               const TimeGrid& grid, Scheme scheme, std::uint64_t seed,
                               const std::optional<Control>& ctrl) {
    if (n_samples < 1) throw InputError("moment_sweep: n_samples must be >= 1");
    if (!(p > 0.0)) throw InputError("moment_sweep: p must be positive");
    MomentSweepResult result;
    if (p < 2.0 || p >= model.declared.eta + 1.0) {
        result.hypothesis_ok = false;
        std::ostringstream msg;
        msg << "moment order p = " << p << " outside [2, eta + 1) = [2, " << model.declared.eta + 1.0 << ")";
        result.warnings.push_back(msg.str());
    }
    std::vector<double> sup_p(n_samples);
    for (double eps : eps_list) {
        if (!(eps > 0.0)) throw InputError("moment_sweep: eps values must be positive");
        if (eps >= 0.5) {
            result.hypothesis_ok = false;
            result.warnings.push_back("eps = " + std::to_string(eps) + " outside (0, 1/2)");
        }
        parallel_for(n_samples, [&](std::size_t i) {
            const RngStream stream{seed, i};
            const Trajectory path = ctrl ? simulate_controlled(model, phi, eps, *ctrl, grid, scheme, stream).trajectory
                                         : simulate(model, phi, eps, grid, scheme, stream);
            sup_p[i] = std::pow(path.sup_norm_forward(), p);
        });
        CompensatedSum sum, sum_sq;
        for (double v : sup_p) sum.add(v);
        const double mean = sum.value() / static_cast<double>(n_samples);
        for (double v : sup_p) sum_sq.add((v - mean) * (v - mean));
        const double var = n_samples > 1 ? sum_sq.value() / static_cast<double>(n_samples - 1) : 0.0;
        result.rows.push_back({eps, p, mean, std::sqrt(var / static_cast<double>(n_samples)), n_samples});
    }
    return result;
}

}  // namespace delayldp
