#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "delayldp/mc.hpp"
#include "delayldp/model_file.hpp"
#include "support.hpp"

using namespace delayldp;

namespace {

// Standard normal upper tail.
double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

}  // namespace

TEST_CASE("whole-space event has probability one") {
    const auto g = make_grid(1.0, 0.05, 1.0);
    const auto model = builtin_model("linear_ou", 1.0);
    const auto phi = test::constant_phi(g, 0.0);
    const EventSpec all{EndpointHalfspace{0, -std::numeric_limits<double>::infinity(), +1}};
    const auto plain = estimate_prob(model, phi, 0.1, all, 500, g, Scheme::euler, 1);
    CHECK(plain.p_hat == 1.0);
    CHECK(plain.std_error == 0.0);
    CHECK(plain.log_p_hat == 0.0);
    const auto is = estimate_prob(model, phi, 0.1, all, 20000, g, Scheme::euler, 1, test::constant_control(g, 0.5));
    CHECK(is.method == EstimateMethod::importance);
    CHECK(std::abs(is.p_hat - 1.0) <= 3.0 * is.std_error);
}

TEST_CASE("plain estimate on the euler OU endpoint matches the gaussian tail") {
    // Euler endpoint is exactly Gaussian with variance eps h sum (1-h)^{2j}.
    const auto g = make_grid(1.0, 0.02, 1.0);
    const double eps = 0.5, a = 0.5;
    double var = 0.0;
    for (std::size_t j = 0; j < g.n_steps; ++j) var += eps * g.step * std::pow(1.0 - g.step, 2.0 * j);
    const double exact = normal_tail(a / std::sqrt(var));
    const auto est = estimate_prob(builtin_model("linear_ou", 1.0), test::constant_phi(g, 0.0), eps,
                                   EventSpec{EndpointHalfspace{0, a, +1}}, 50000, g, Scheme::euler, 3);
    CHECK(std::abs(est.p_hat - exact) <= 3.0 * est.std_error);
    CHECK(est.ess == static_cast<double>(est.hits));
}

TEST_CASE("importance sampling is unbiased on a moderately rare event") {
    const auto g = make_grid(1.0, 0.02, 1.0);
    const double eps = 0.1, a = 1.0;
    double var = 0.0;
    for (std::size_t j = 0; j < g.n_steps; ++j) var += eps * g.step * std::pow(1.0 - g.step, 2.0 * j);
    const double exact = normal_tail(a / std::sqrt(var));
    const auto model = builtin_model("linear_ou", 1.0);
    const auto phi = test::constant_phi(g, 0.0);
    const EventSpec event{EndpointHalfspace{0, a, +1}};
    const auto opt = minimize_rate(model, phi, event, g);
    const auto est = estimate_prob(model, phi, eps, event, 20000, g, Scheme::euler, 5, opt.control);
    CHECK(std::abs(est.p_hat - exact) <= 3.0 * est.std_error);
    CHECK(est.ess > 1000.0);
    CHECK(est.warnings.empty());
}

TEST_CASE("zero hits give -inf with a hint") {
    const auto g = make_grid(1.0, 0.05, 1.0);
    const auto est = estimate_prob(builtin_model("linear_ou", 1.0), test::constant_phi(g, 0.0), 0.01,
                                   EventSpec{EndpointHalfspace{0, 5.0, +1}}, 200, g, Scheme::euler, 1);
    CHECK(est.hits == 0);
    CHECK(est.p_hat == 0.0);
    CHECK(std::isinf(est.log_p_hat));
    CHECK(est.log_p_hat < 0.0);
    CHECK_FALSE(est.warnings.empty());
}

TEST_CASE("estimates do not depend on the worker count") {
    const auto g = make_grid(1.0, 0.05, 1.0);
    const auto model = builtin_model("cubic_const_sigma", 1.0);
    const auto phi = test::constant_phi(g, 0.0);
    const EventSpec event{EndpointHalfspace{0, 0.5, +1}};
    const auto ctrl = test::constant_control(g, 0.4);
    setenv("DELAYLDP_THREADS", "1", 1);
    const auto one = estimate_prob(model, phi, 0.2, event, 3000, g, Scheme::tamed_euler, 9, ctrl);
    setenv("DELAYLDP_THREADS", "3", 1);
    const auto three = estimate_prob(model, phi, 0.2, event, 3000, g, Scheme::tamed_euler, 9, ctrl);
    unsetenv("DELAYLDP_THREADS");
    CHECK(one.p_hat == three.p_hat);
    CHECK(one.std_error == three.std_error);
    CHECK(one.ess == three.ess);
}

TEST_CASE("derived streams") {
    CHECK(derive_stream(4, 17) == derive_stream(4, 17));
    CHECK_FALSE(derive_stream(4, 17) == derive_stream(4, 18));
    CHECK_FALSE(derive_stream(4, 17) == derive_stream(5, 17));

    // First normals of distinct streams behave like independent samples of one law.
    const std::size_t n = 20000;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = NormalSource(derive_stream(1, 2 * i)).next_normal();
        b[i] = NormalSource(derive_stream(1, 2 * i + 1)).next_normal();
    }
    // Critical value at alpha = 1e-3 for equal sample sizes.
    CHECK(ks_statistic(a, b) < 1.9495 * std::sqrt(2.0 / n));
}

TEST_CASE("sweep on brownian noise recovers the rate") {
    // b = 0, sigma = 1, X(1) >= 1: p ~ Phi(-1/sqrt eps), rate 1/2.
    const auto g = make_grid(1.0, 0.02, 1.0);
    SweepConfig cfg;
    cfg.eps_list = {0.2, 0.1, 0.05, 0.02};
    cfg.n_per_eps = 20000;
    cfg.scheme = Scheme::euler;
    cfg.seed = 3;
    const auto r = epsilon_sweep(test::additive(1.0), test::constant_phi(g, 0.0), EventSpec{EndpointHalfspace{0, 1.0, +1}},
                                 g, cfg);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.extrapolated_rate == doctest::Approx(0.5).epsilon(0.1));
    CHECK(r.variational_value == doctest::Approx(0.5).epsilon(0.01));
    CHECK(r.gap == doctest::Approx(std::abs(r.extrapolated_rate - r.variational_value)));
    CHECK(r.rate_stderr > 0.0);
    for (const auto& row : r.rows) {
        CHECK(row.used_in_fit);
        CHECK(row.eps_log_p == doctest::Approx(row.eps * std::log(normal_tail(1.0 / std::sqrt(row.eps)))).epsilon(0.1));
    }
}

TEST_CASE("sweep on a certain event has zero rate") {
    const auto g = make_grid(1.0, 0.05, 1.0);
    SweepConfig cfg;
    cfg.eps_list = {0.2, 0.1, 0.05};
    cfg.n_per_eps = 500;
    cfg.use_is = false;
    cfg.scheme = Scheme::euler;
    const auto r = epsilon_sweep(builtin_model("linear_ou", 1.0), test::constant_phi(g, 0.0),
                                 EventSpec{EndpointHalfspace{0, -std::numeric_limits<double>::infinity(), +1}}, g, cfg);
    CHECK(std::abs(r.extrapolated_rate) <= 1e-9);
    CHECK(r.variational_value <= 1e-10);
}

TEST_CASE("sweep without enough usable rows is a fit error") {
    const auto g = make_grid(1.0, 0.05, 1.0);
    SweepConfig cfg;
    cfg.eps_list = {0.2, 0.1, 0.05};
    cfg.n_per_eps = 100;
    cfg.use_is = false;
    cfg.scheme = Scheme::euler;
    CHECK_THROWS_AS((void)epsilon_sweep(builtin_model("linear_ou", 1.0), test::constant_phi(g, 0.0),
                                        EventSpec{EndpointHalfspace{0, 3.0, +1}}, g, cfg),
                    FitError);
    cfg.eps_list = {0.1, 0.2};
    CHECK_THROWS_AS((void)epsilon_sweep(builtin_model("linear_ou", 1.0), test::constant_phi(g, 0.0),
                                        EventSpec{EndpointHalfspace{0, 3.0, +1}}, g, cfg),
                    InputError);
}

TEST_CASE("geometric budget scales the sample count") {
    const auto g = make_grid(1.0, 0.05, 1.0);
    SweepConfig cfg;
    cfg.eps_list = {0.4, 0.2, 0.1};
    cfg.n_per_eps = 300;
    cfg.use_is = false;
    cfg.scheme = Scheme::euler;
    cfg.budget = SampleBudget::geometric;
    const auto r = epsilon_sweep(builtin_model("linear_ou", 1.0), test::constant_phi(g, 0.0),
                                 EventSpec{EndpointHalfspace{0, 0.3, +1}}, g, cfg);
    CHECK(r.rows[0].estimate.n == 300);
    CHECK(r.rows[1].estimate.n == 600);
    CHECK(r.rows[2].estimate.n == 1200);
}
