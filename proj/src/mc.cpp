#include "delayldp/mc.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "delayldp/parallel.hpp"

namespace delayldp {

RngStream derive_stream(std::uint64_t seed, std::uint64_t sample_index) noexcept { return {seed, sample_index}; }

ProbEstimate estimate_prob(const CoefficientModel& model, const InitialSegment& phi, double eps, const EventSpec& event,
                           std::size_t n_samples, const TimeGrid& grid, Scheme scheme, std::uint64_t seed,
                           const std::optional<Control>& is_control) {
    if (n_samples < 1) throw InputError("estimate_prob: n_samples must be >= 1");
    if (!(eps > 0.0)) throw InputError("estimate_prob: eps must be positive");
    if (is_control && !(is_control->grid() == grid)) {
        throw InputError("estimate_prob: importance control is not on the simulation grid");
    }

    // Per-sample contribution 1_event * w; reduced sequentially below so the
    // estimate does not depend on the worker count.
    std::vector<double> contrib(n_samples, 0.0);
    std::vector<unsigned char> hit(n_samples, 0);
    parallel_for(n_samples, [&](std::size_t i) {
        const RngStream stream = derive_stream(seed, i);
        if (is_control) {
            const ControlledRun run = simulate_controlled(model, phi, eps, *is_control, grid, scheme, stream);
            if (event.contains(run.trajectory)) {
                hit[i] = 1;
                contrib[i] = std::exp(run.log_weight);
            }
        } else {
            const Trajectory path = simulate(model, phi, eps, grid, scheme, stream);
            if (event.contains(path)) {
                hit[i] = 1;
                contrib[i] = 1.0;
            }
        }
    });

    ProbEstimate est;
    est.n = n_samples;
    est.method = is_control ? EstimateMethod::importance : EstimateMethod::plain;
    const double n = static_cast<double>(n_samples);
    CompensatedSum sum, sum_sq;
    for (std::size_t i = 0; i < n_samples; ++i) {
        est.hits += hit[i];
        sum.add(contrib[i]);
        sum_sq.add(contrib[i] * contrib[i]);
    }
    if (est.method == EstimateMethod::plain) {
        est.p_hat = static_cast<double>(est.hits) / n;
        est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / n);
        est.ess = static_cast<double>(est.hits);
    } else {
        est.p_hat = sum.value() / n;
        CompensatedSum dev;
        for (double c : contrib) dev.add((c - est.p_hat) * (c - est.p_hat));
        const double var = n_samples > 1 ? dev.value() / (n - 1.0) : 0.0;
        est.std_error = std::sqrt(var / n);
        est.ess = sum_sq.value() > 0.0 ? sum.value() * sum.value() / sum_sq.value() : 0.0;
        if (est.ess < 10.0) {
            std::ostringstream msg;
            msg << "effective sample size " << est.ess << " < 10; importance estimate unreliable";
            est.warnings.push_back(msg.str());
        }
        if (est.p_hat > 1.0) {
            est.warnings.push_back("importance estimate exceeded 1 and was clamped");
            est.p_hat = 1.0;
        }
    }
    if (est.hits == 0) {
        est.log_p_hat = -std::numeric_limits<double>::infinity();
        if (est.method == EstimateMethod::plain) {
            est.warnings.push_back("no hits in plain Monte Carlo; use importance sampling");
        }
    } else {
        est.log_p_hat = std::log(est.p_hat);
    }
    return est;
}

SweepResult epsilon_sweep(const CoefficientModel& model, const InitialSegment& phi, const EventSpec& event,
                          const TimeGrid& grid, const SweepConfig& cfg) {
    if (cfg.eps_list.empty()) throw InputError("epsilon_sweep: eps_list is empty");
    for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
        if (!(cfg.eps_list[i] > 0.0)) throw InputError("epsilon_sweep: eps values must be positive");
        if (i > 0 && !(cfg.eps_list[i] < cfg.eps_list[i - 1])) {
            throw InputError("epsilon_sweep: eps_list must be strictly decreasing");
        }
    }

    SweepResult result;
    const MinimizeResult variational = minimize_rate(model, phi, event, grid, cfg.minimize);
    result.variational_value = variational.value;
    result.variational_converged = variational.converged;
    if (!variational.converged) result.warnings.push_back("variational minimization: " + variational.message);
    std::optional<Control> is_control;
    if (cfg.use_is) is_control = variational.control;

    const double eps0 = cfg.eps_list.front();
    for (double eps : cfg.eps_list) {
        std::size_t n = cfg.n_per_eps;
        if (cfg.budget == SampleBudget::geometric) {
            n = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.n_per_eps) * eps0 / eps));
        }
        SweepRow row;
        row.eps = eps;
        row.estimate = estimate_prob(model, phi, eps, event, n, grid, cfg.scheme, cfg.seed, is_control);
        for (const auto& w : row.estimate.warnings) {
            std::ostringstream msg;
            msg << "eps = " << eps << ": " << w;
            result.warnings.push_back(msg.str());
        }
        if (std::isfinite(row.estimate.log_p_hat)) {
            row.eps_log_p = eps * row.estimate.log_p_hat;
            row.eps_log_p_stderr = eps * row.estimate.std_error / row.estimate.p_hat;
            row.used_in_fit = true;
        } else {
            row.eps_log_p = -std::numeric_limits<double>::infinity();
            row.eps_log_p_stderr = std::numeric_limits<double>::infinity();
            std::ostringstream msg;
            msg << "eps = " << eps << ": zero estimate excluded from the fit";
            result.warnings.push_back(msg.str());
        }
        result.rows.push_back(std::move(row));
    }

    // Weighted least squares for eps log p = intercept + slope * eps.
    CompensatedSum sw, sx, sy, sxx, sxy;
    std::size_t usable = 0;
    for (const auto& row : result.rows) {
        if (!row.used_in_fit) continue;
        ++usable;
        const double se = std::max(row.eps_log_p_stderr, 1e-12);
        const double w = 1.0 / (se * se);
        sw.add(w);
        sx.add(w * row.eps);
        sy.add(w * row.eps_log_p);
        sxx.add(w * row.eps * row.eps);
        sxy.add(w * row.eps * row.eps_log_p);
    }
    if (usable < 3) {
        throw FitError("epsilon_sweep: only " + std::to_string(usable) + " usable rows; at least 3 are needed");
    }
    const double det = sw.value() * sxx.value() - sx.value() * sx.value();
    if (!(det > 0.0)) throw FitError("epsilon_sweep: degenerate fit (eps values coincide)");
    const double intercept = (sxx.value() * sy.value() - sx.value() * sxy.value()) / det;
    result.slope = (sw.value() * sxy.value() - sx.value() * sy.value()) / det;
    result.extrapolated_rate = -intercept;
    result.rate_stderr = std::sqrt(sxx.value() / det);
    result.gap = std::abs(result.extrapolated_rate - result.variational_value);
    return result;
}

}  // namespace delayldp
