#include "delayldp/rate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "delayldp/skeleton.hpp"

namespace delayldp {

// =============================================================================
// evaluate_rate
// =============================================================================

RateCertificate evaluate_rate(const CoefficientModel& model, const Trajectory& f, const TimeGrid& grid,
                              const RateOptions& opts) {
    if (!(f.grid() == grid)) throw InputError("evaluate_rate: path grid does not match");
    if (f.dim() != model.d) throw InputError("evaluate_rate: path dimension differs from model d");
    if (std::abs(model.tau - grid.tau) > 1e-12 * std::max(1.0, grid.tau)) {
        throw InputError("evaluate_rate: model tau does not match the grid's tau");
    }
    for (double v : f.values()) {
        if (!std::isfinite(v)) throw InputError("evaluate_rate: path has non-finite values");
    }

    const std::size_t d = model.d;
    const std::size_t m = model.m;
    const double h = grid.step;
    const double tol = opts.feasibility_tolerance > 0.0 ? opts.feasibility_tolerance : 10.0 * h;
    const auto lag = static_cast<std::ptrdiff_t>(grid.n_history);

    RateCertificate cert;
    cert.control = Control(grid, m);
    cert.residuals.assign(grid.n_steps, 0.0);

    std::vector<double> b(d), sig(d * m);
    Eigen::MatrixXd sigma(d, m);
    Eigen::VectorXd r(d);
    double energy = 0.0;
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const auto i = static_cast<std::ptrdiff_t>(k);
        auto x = f.node(i);
        auto x_next = f.node(i + 1);
        model.drift(grid.time(i), x, f.node(i - lag), b);
        model.diffusion(grid.time(i), x, f.node(i - lag), sig);
        for (std::size_t c = 0; c < d; ++c) r(static_cast<Eigen::Index>(c)) = (x_next[c] - x[c]) / h - b[c];
        for (std::size_t row = 0; row < d; ++row) {
            for (std::size_t col = 0; col < m; ++col) {
                sigma(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = sig[row * m + col];
            }
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sigma, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const double cutoff = sv.size() > 0 ? opts.rank_cutoff * sv(0) : 0.0;
        Eigen::VectorXd phi_star = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
        if (sv.size() > 0 && sv(0) > 0.0) {
            const Eigen::VectorXd ut_r = svd.matrixU().transpose() * r;
            Eigen::VectorXd scaled = Eigen::VectorXd::Zero(sv.size());
            for (Eigen::Index j = 0; j < sv.size(); ++j) {
                if (sv(j) > cutoff) scaled(j) = ut_r(j) / sv(j);
            }
            phi_star = svd.matrixV() * scaled;
        }
        auto out = cert.control.at(k);
        for (std::size_t c = 0; c < m; ++c) out[c] = phi_star(static_cast<Eigen::Index>(c));
        cert.residuals[k] = (r - sigma * phi_star).norm();
        energy += phi_star.squaredNorm();
    }
    cert.max_residual = cert.residuals.empty() ? 0.0 : *std::max_element(cert.residuals.begin(), cert.residuals.end());
    cert.feasible = cert.max_residual <= tol;
    cert.value = cert.feasible ? 0.5 * h * energy : std::numeric_limits<double>::infinity();
    return cert;
}

// =============================================================================
// Penalized objective and its adjoint gradient
// =============================================================================

PenaltyObjective::PenaltyObjective(const CoefficientModel& model, const InitialSegment& phi, EventSpec event,
                                   TimeGrid grid, double penalty)
    : model_(model), phi_(phi), event_(std::move(event)), grid_(grid), penalty_(penalty) {
    if (!event_.is_endpoint_event()) {
        throw InputError("minimize_rate: only endpoint_halfspace and endpoint_ball_exterior events are supported");
    }
}

double PenaltyObjective::value(const Control& ctrl) const {
    const Trajectory z = solve_skeleton(model_, phi_, ctrl, grid_);
    const double v = event_.endpoint_violation(z.node(static_cast<std::ptrdiff_t>(grid_.n_steps)));
    return 0.5 * l2_norm_sq(ctrl) + penalty_ * v * v;
}

namespace {

// Vector-Jacobian products of F(t, x, y) = b(t, x, y) + sigma(t, x, y) u against v.
// x and y derivatives use central differences of the scalar v . F; the u part is exact.
class VectorField {
public:
    VectorField(const CoefficientModel& model) : model_(model), b_(model.d), sig_(model.d * model.m), xp_(model.d), yp_(model.d) {}

    double dot(double t, std::span<const double> x, std::span<const double> y, std::span<const double> u,
               std::span<const double> v) {
        model_.drift(t, x, y, b_);
        model_.diffusion(t, x, y, sig_);
        const std::size_t m = model_.m;
        double s = 0.0;
        for (std::size_t r = 0; r < model_.d; ++r) {
            double fr = b_[r];
            for (std::size_t c = 0; c < m; ++c) fr += sig_[r * m + c] * u[c];
            s += v[r] * fr;
        }
        return s;
    }

    void eval(double t, std::span<const double> x, std::span<const double> y, std::span<const double> u,
              std::span<double> out) {
        model_.drift(t, x, y, out);
        model_.diffusion(t, x, y, sig_);
        const std::size_t m = model_.m;
        for (std::size_t r = 0; r < model_.d; ++r) {
            for (std::size_t c = 0; c < m; ++c) out[r] += sig_[r * m + c] * u[c];
        }
    }

    void vjp(double t, std::span<const double> x, std::span<const double> y, std::span<const double> u,
             std::span<const double> v, std::span<double> vx, std::span<double> vy, std::span<double> vu) {
        const std::size_t d = model_.d;
        const std::size_t m = model_.m;
        std::copy(x.begin(), x.end(), xp_.begin());
        std::copy(y.begin(), y.end(), yp_.begin());
        for (std::size_t c = 0; c < d; ++c) {
            const double dx = 1e-6 * (1.0 + std::abs(x[c]));
            xp_[c] = x[c] + dx;
            const double hi = dot(t, xp_, y, u, v);
            xp_[c] = x[c] - dx;
            const double lo = dot(t, xp_, y, u, v);
            xp_[c] = x[c];
            vx[c] = (hi - lo) / (2.0 * dx);

            const double dy = 1e-6 * (1.0 + std::abs(y[c]));
            yp_[c] = y[c] + dy;
            const double hi_y = dot(t, x, yp_, u, v);
            yp_[c] = y[c] - dy;
            const double lo_y = dot(t, x, yp_, u, v);
            yp_[c] = y[c];
            vy[c] = (hi_y - lo_y) / (2.0 * dy);
        }
        model_.diffusion(t, x, y, sig_);
        for (std::size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) s += sig_[r * m + c] * v[r];
            vu[c] = s;
        }
    }

private:
    const CoefficientModel& model_;
    std::vector<double> b_, sig_, xp_, yp_;
};

}  // namespace

double PenaltyObjective::value_and_adjoint_gradient(const Control& ctrl, Control& grad) const {
    const Trajectory z = solve_skeleton(model_, phi_, ctrl, grid_);
    const std::size_t d = model_.d;
    const std::size_t m = model_.m;
    const double h = grid_.step;
    const std::size_t n = grid_.n_steps;
    const auto lag = static_cast<std::ptrdiff_t>(grid_.n_history);

    auto endpoint = z.node(static_cast<std::ptrdiff_t>(n));
    const double viol = event_.endpoint_violation(endpoint);
    const double value = 0.5 * l2_norm_sq(ctrl) + penalty_ * viol * viol;

    grad = Control(grid_, m);
    for (std::size_t k = 0; k < n; ++k) {
        auto g = grad.at(k);
        auto u = ctrl.at(k);
        for (std::size_t c = 0; c < m; ++c) g[c] = h * u[c];
    }

    // Adjoint per node, indexed like the trajectory (offset by n_history).
    std::vector<double> lambda(grid_.total_nodes() * d, 0.0);
    auto lam = [&](std::ptrdiff_t i) {
        return std::span<double>(lambda.data() + static_cast<std::size_t>(i + lag) * d, d);
    };
    {
        std::vector<double> terminal(d);
        event_.endpoint_violation_sq_gradient(endpoint, terminal);
        auto l = lam(static_cast<std::ptrdiff_t>(n));
        for (std::size_t c = 0; c < d; ++c) l[c] = penalty_ * terminal[c];
    }

    VectorField field(model_);
    std::vector<double> k1(d), k2(d), k3(d), x2(d), x3(d), x4(d), ymid(d);
    std::vector<double> g1(d), g2(d), g3(d), g4(d), vx(d), vy(d), vu(m);
    for (std::size_t kk = n; kk-- > 0;) {
        const auto i = static_cast<std::ptrdiff_t>(kk);
        const double t = grid_.time(i);
        auto x1 = z.node(i);
        auto ylo = z.node(i - lag);
        auto yhi = z.node(i - lag + 1);
        auto u = ctrl.at(kk);
        for (std::size_t c = 0; c < d; ++c) ymid[c] = 0.5 * (ylo[c] + yhi[c]);

        // Replay the forward stages.
        field.eval(t, x1, ylo, u, k1);
        for (std::size_t c = 0; c < d; ++c) x2[c] = x1[c] + 0.5 * h * k1[c];
        field.eval(t + 0.5 * h, x2, ymid, u, k2);
        for (std::size_t c = 0; c < d; ++c) x3[c] = x1[c] + 0.5 * h * k2[c];
        field.eval(t + 0.5 * h, x3, ymid, u, k3);
        for (std::size_t c = 0; c < d; ++c) x4[c] = x1[c] + h * k3[c];

        std::vector<double> s(lam(i + 1).begin(), lam(i + 1).end());
        auto lk = lam(i);
        auto llo = lam(i - lag);
        auto gk = grad.at(kk);
        for (std::size_t c = 0; c < d; ++c) {
            g1[c] = h / 6.0 * s[c];
            g2[c] = h / 3.0 * s[c];
            g3[c] = h / 3.0 * s[c];
            g4[c] = h / 6.0 * s[c];
            lk[c] += s[c];
        }
        auto accumulate_u = [&] {
            for (std::size_t c = 0; c < m; ++c) gk[c] += vu[c];
        };

        field.vjp(t + h, x4, yhi, u, g4, vx, vy, vu);
        accumulate_u();
        {
            auto lhi = lam(i - lag + 1);
            for (std::size_t c = 0; c < d; ++c) {
                lk[c] += vx[c];
                g3[c] += h * vx[c];
                lhi[c] += vy[c];
            }
        }
        field.vjp(t + 0.5 * h, x3, ymid, u, g3, vx, vy, vu);
        accumulate_u();
        {
            auto lhi = lam(i - lag + 1);
            for (std::size_t c = 0; c < d; ++c) {
                lk[c] += vx[c];
                g2[c] += 0.5 * h * vx[c];
                llo[c] += 0.5 * vy[c];
                lhi[c] += 0.5 * vy[c];
            }
        }
        field.vjp(t + 0.5 * h, x2, ymid, u, g2, vx, vy, vu);
        accumulate_u();
        {
            auto lhi = lam(i - lag + 1);
            for (std::size_t c = 0; c < d; ++c) {
                lk[c] += vx[c];
                g1[c] += 0.5 * h * vx[c];
                llo[c] += 0.5 * vy[c];
                lhi[c] += 0.5 * vy[c];
            }
        }
        field.vjp(t, x1, ylo, u, g1, vx, vy, vu);
        accumulate_u();
        for (std::size_t c = 0; c < d; ++c) {
            lk[c] += vx[c];
            llo[c] += vy[c];
        }
    }
    return value;
}

// =============================================================================
// fd_gradient
// =============================================================================

Control fd_gradient(const ControlObjective& objective, const Control& ctrl, double step) {
    Control grad(ctrl.grid(), ctrl.dim());
    Control probe = ctrl;
    auto g = grad.values();
    auto p = probe.values();
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double base = p[j];
        const double delta = step > 0.0 ? step : 1e-6 * (1.0 + std::abs(base));
        p[j] = base + delta;
        const double hi = objective(probe);
        p[j] = base - delta;
        const double lo = objective(probe);
        p[j] = base;
        if (!std::isfinite(hi) || !std::isfinite(lo)) {
            throw NumericalError("fd_gradient: non-finite objective at coordinate " + std::to_string(j));
        }
        g[j] = (hi - lo) / (2.0 * delta);
    }
    return grad;
}

// =============================================================================
// minimize_rate: quadratic penalty rounds of BFGS with backtracking
// =============================================================================

namespace {

struct RoundOutcome {
    double start_value = 0.0;
    double end_value = 0.0;
    std::size_t iterations = 0;
    bool line_search_failed = false;
};

RoundOutcome bfgs_round(const PenaltyObjective& objective, GradientMethod method, Control& x, double gtol,
                        std::size_t max_iter) {
    const std::size_t n = x.size();
    const double h = x.grid().step;
    auto evaluate = [&](const Control& at, Control& grad) {
        if (method == GradientMethod::adjoint) return objective.value_and_adjoint_gradient(at, grad);
        grad = fd_gradient([&](const Control& c) { return objective.value(c); }, at);
        return objective.value(at);
    };

    Control g;
    double f = evaluate(x, g);
    RoundOutcome out;
    out.start_value = f;

    // Inverse Hessian, initialized to the inverse of the control-energy curvature h*I.
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) / h;
    Eigen::Map<const Eigen::VectorXd> gvec_init(g.values().data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd gvec = gvec_init;
    Control trial = x;
    Control g_trial;
    for (std::size_t it = 0; it < max_iter; ++it) {
        if (gvec.norm() < gtol) break;
        Eigen::VectorXd dir = -hinv * gvec;
        double slope = gvec.dot(dir);
        if (slope >= 0.0) {
            hinv.setIdentity();
            hinv /= h;
            dir = -hinv * gvec;
            slope = gvec.dot(dir);
        }
        double alpha = 1.0;
        double f_trial = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            auto tv = trial.values();
            auto xv = x.values();
            for (std::size_t j = 0; j < n; ++j) tv[j] = xv[j] + alpha * dir(static_cast<Eigen::Index>(j));
            try {
                f_trial = evaluate(trial, g_trial);
            } catch (const BlowUpError&) {
                alpha *= 0.5;
                continue;
            }
            if (std::isfinite(f_trial) && f_trial <= f + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            out.line_search_failed = true;
            break;
        }
        Eigen::Map<const Eigen::VectorXd> g_new(g_trial.values().data(), static_cast<Eigen::Index>(n));
        const Eigen::VectorXd s = alpha * dir;
        const Eigen::VectorXd y = g_new - gvec;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = hinv * y;
            // (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
        }
        std::swap(x, trial);
        f = f_trial;
        gvec = g_new;
        out.iterations = it + 1;
    }
    out.end_value = f;
    return out;
}

}  // namespace

MinimizeResult minimize_rate(const CoefficientModel& model, const InitialSegment& phi, const EventSpec& event,
                             const TimeGrid& grid, const MinimizeConfig& cfg) {
    if (!event.is_endpoint_event()) {
        throw InputError("minimize_rate: tube_exit events are not supported; use an endpoint event");
    }
    if (!(cfg.initial_penalty > 0.0) || !(cfg.penalty_growth > 1.0)) {
        throw InputError("minimize_rate: penalty weights must be positive and increasing");
    }
    PenaltyObjective objective(model, phi, event, grid, cfg.initial_penalty);
    Control x(grid, model.m);
    MinimizeResult result;
    double mu = cfg.initial_penalty;
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        objective.set_penalty(mu);
        const RoundOutcome r = bfgs_round(objective, cfg.gradient, x, cfg.gradient_tolerance, cfg.max_iterations);
        result.round_values.push_back(0.5 * l2_norm_sq(x));
        if (r.iterations == 0 && r.line_search_failed) {
            const Trajectory z = solve_skeleton(model, phi, x, grid);
            const double v = event.endpoint_violation(z.node(static_cast<std::ptrdiff_t>(grid.n_steps)));
            if (v > 1e-4) {
                result.converged = false;
                std::ostringstream msg;
                msg << "optimizer stagnated in penalty round " << round + 1 << " (mu = " << mu
                    << "); returning best iterate";
                result.message = msg.str();
                break;
            }
        }
        mu *= cfg.penalty_growth;
    }
    result.trajectory = solve_skeleton(model, phi, x, grid);
    result.violation = event.endpoint_violation(result.trajectory.node(static_cast<std::ptrdiff_t>(grid.n_steps)));
    result.value = 0.5 * l2_norm_sq(x);
    if (result.converged && result.violation > 1e-4) {
        result.converged = false;
        std::ostringstream msg;
        msg << "constraint violation " << result.violation << " exceeds 1e-4 after " << cfg.rounds
            << " penalty rounds; event may be unreachable through sigma's range";
        result.message = msg.str();
    }
    result.control = std::move(x);
    return result;
}

}  // namespace delayldp
