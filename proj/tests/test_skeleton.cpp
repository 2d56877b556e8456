#include <doctest.h>

#include <cmath>
#include <random>

#include "delayldp/model_file.hpp"
#include "delayldp/skeleton.hpp"
#include "support.hpp"

using namespace delayldp;

namespace {

double max_error_vs_exp(double h) {
    const auto g = make_grid(1.0, h, 0.2);
    const auto model = test::decay(0.2);
    const auto z = solve_skeleton(model, test::constant_phi(g, 1.0), Control(g, 1), g);
    double err = 0.0;
    for (std::size_t k = 0; k <= g.n_steps; ++k) {
        err = std::max(err, std::abs(z.node(static_cast<std::ptrdiff_t>(k))[0] - std::exp(-g.time(k))));
    }
    return err;
}

Control random_control(const TimeGrid& g, std::mt19937_64& gen, double budget) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.05, 1.0);
    std::vector<double> v(g.n_steps);
    // Smooth-ish random control: a few random Fourier modes.
    const double a = nd(gen), b = nd(gen), c = nd(gen), w = 1.0 + 6.0 * ud(gen);
    for (std::size_t k = 0; k < g.n_steps; ++k) {
        const double t = g.time(k);
        v[k] = a + b * std::sin(w * t) + c * std::cos(2.0 * w * t);
    }
    Control ctrl(g, 1, v);
    const double scale = std::sqrt(budget * ud(gen) / l2_norm_sq(ctrl));
    for (auto& e : ctrl.values()) e *= scale;
    return ctrl;
}

}  // namespace

TEST_CASE("additive skeleton is a straight line") {
    const auto g = make_grid(1.0, 0.01, 0.5);
    const auto z = solve_skeleton(test::additive(0.5), test::constant_phi(g, 0.7), test::constant_control(g, 2.0), g);
    for (std::size_t k = 0; k <= g.n_steps; ++k) {
        CHECK(z.node(static_cast<std::ptrdiff_t>(k))[0] == doctest::Approx(0.7 + 2.0 * g.time(k)).epsilon(1e-12));
    }
}

TEST_CASE("method of steps on z' = z(t - 1)") {
    // Hand solution: z = 1 + t on [0,1], z = 2 + (t-1) + (t-1)^2/2 on [1,2].
    const auto g = make_grid(2.0, 1e-3, 1.0);
    const auto z = solve_skeleton(test::delay_feedback(1.0), test::constant_phi(g, 1.0), Control(g, 1), g);
    CHECK(z.node(1000)[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(z.node(2000)[0] - 3.5) <= 1e-6);
    CHECK(std::abs(eval_path(z, 1.5)[0] - (2.5 + 0.125)) <= 1e-6);
}

TEST_CASE("rk4 is fourth order on z' = -z") {
    CHECK(max_error_vs_exp(0.1) <= 1e-5);
    double previous = max_error_vs_exp(0.2);
    for (double h : {0.1, 0.05, 0.025}) {
        const double err = max_error_vs_exp(h);
        const double ratio = previous / err;
        CHECK(ratio >= 12.0);
        CHECK(ratio <= 20.0);
        previous = err;
    }
}

TEST_CASE("history is preserved bit-exactly") {
    const auto g = make_grid(1.0, 0.05, 0.25);
    const auto phi = InitialSegment::from_function(g, 1, [](double t, std::span<double> out) { out[0] = std::cos(3.0 * t); });
    const auto model = builtin_model("cubic_const_sigma", 0.25);
    for (auto method : {SkeletonMethod::steps_rk4, SkeletonMethod::picard_truncated}) {
        const auto z = solve_skeleton(model, phi, test::constant_control(g, 0.3), g, {method, {}});
        for (std::ptrdiff_t j = -5; j <= 0; ++j) CHECK(z.node(j)[0] == phi.node(j)[0]);
    }
}

TEST_CASE("mismatched inputs are rejected") {
    const auto g = make_grid(1.0, 0.1, 0.5);
    const auto other = make_grid(1.0, 0.05, 0.5);
    const auto model = builtin_model("linear_ou", 0.5);
    CHECK_THROWS_AS((void)solve_skeleton(model, test::constant_phi(g, 0.0), Control(other, 1), g), InputError);
    CHECK_THROWS_AS((void)solve_skeleton(builtin_model("linear_ou", 1.0), test::constant_phi(g, 0.0), Control(g, 1), g),
                    InputError);
}

TEST_CASE("blow-up is reported with the first bad node") {
    auto model = test::scalar_model(
        0.5, [](double, std::span<const double> x, std::span<const double>, std::span<double> out) { out[0] = x[0] * x[0] * x[0]; },
        [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; });
    const auto g = make_grid(1.0, 0.01, 0.5);
    try {
        (void)solve_skeleton(model, test::constant_phi(g, 2.0), Control(g, 1), g);
        FAIL("expected blow-up");
    } catch (const BlowUpError& e) {
        // Exact blow-up time of z' = z^3, z(0) = 2 is 1/8.
        CHECK(e.step() >= 12);
        CHECK(e.step() <= 20);
    }
}

TEST_CASE("truncate_sigma cases") {
    const auto base = test::additive(1.0, 2.0);
    const double n = 4.0;
    const auto cut = truncate_sigma(base, n);
    auto sig = [&](double x, double y) {
        const double xs[] = {x};
        const double ys[] = {y};
        return cut.sigma(0.0, xs, ys)[0];
    };
    CHECK(sig(n / 2, -n / 2) == 2.0);
    CHECK(sig(2.5 * n, 0.0) == 0.0);
    CHECK(sig(0.3, -2.5 * n) == 0.0);
    CHECK(sig(1.5 * n, 0.5 * n) == doctest::Approx(0.5 * 2.0));
    CHECK(sig(-0.5 * n, 1.75 * n) == doctest::Approx(0.25 * 2.0));
    CHECK(sig(1.5 * n, -1.5 * n) == doctest::Approx(0.25 * 2.0));
    // Drift untouched.
    const double big[] = {10.0 * n};
    CHECK(cut.b(0.0, big, big)[0] == 0.0);
    CHECK_THROWS_AS((void)truncate_sigma(base, 0.5), InputError);
}

TEST_CASE("truncate_sigma is continuous across case boundaries") {
    const double n = 3.0;
    for (double edge : {n, 2.0 * n}) {
        for (double other : {0.5 * n, 1.5 * n}) {
            const double below = truncation_factor(edge - 1e-8, other, n);
            const double above = truncation_factor(edge + 1e-8, other, n);
            CHECK(std::abs(below - above) <= 1e-6);
            CHECK(std::abs(truncation_factor(other, edge - 1e-8, n) - truncation_factor(other, edge + 1e-8, n)) <= 1e-6);
        }
    }
}

TEST_CASE("apriori_bound closed form") {
    const auto g = make_grid(1.0, 0.1, 0.5);
    auto model = test::additive(0.5);
    model.declared.K4 = 1.0;
    model.declared.eta = 2.0;
    CHECK(apriori_bound(model, test::constant_phi(g, 1.0), Control(g, 1)) == doctest::Approx(3.0 * std::exp(4.0)));
    CHECK(apriori_bound(model, test::constant_phi(g, 1.0), Control(g, 1)) == doctest::Approx(163.794).epsilon(1e-5));

    model.declared.K4 = 0.0;
    CHECK(apriori_bound(model, test::constant_phi(g, -1.5), Control(g, 1)) == doctest::Approx(2.25));

    model.declared.K4 = 0.7;
    const auto c1 = test::constant_control(g, 1.0);
    const auto c2 = test::constant_control(g, std::sqrt(2.0));  // doubles |phi|^2
    const auto phi = test::constant_phi(g, 0.4);
    CHECK(apriori_bound(model, phi, c2) ==
          doctest::Approx(apriori_bound(model, phi, c1) * std::exp(l2_norm_sq(c1) / model.declared.eta)));
}

TEST_CASE("a priori bound holds on skeleton solutions") {
    const auto model = builtin_model("cubic_const_sigma", 1.0);
    const auto g = make_grid(1.0, 0.01, 1.0);
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ctrl = random_control(g, gen, 4.0);
        for (double x0 : {0.0, 1.0, -1.2}) {
            const auto phi = test::constant_phi(g, x0);
            const auto z = solve_skeleton(model, phi, ctrl, g);
            CHECK(z.sup_norm_sq() <= apriori_bound(model, phi, ctrl) * 1.01);
        }
    }
}

TEST_CASE("picard construction agrees with rk4") {
    const auto g = make_grid(2.0, 0.01, 1.0);
    std::mt19937_64 gen(99);
    for (const char* name : {"cubic_const_sigma", "cubic_quadratic_sigma", "linear_ou"}) {
        const auto model = builtin_model(name, 1.0);
        const auto ctrl = random_control(g, gen, 2.0);
        const auto phi = test::constant_phi(g, 0.5);
        const auto a = solve_skeleton(model, phi, ctrl, g, {SkeletonMethod::steps_rk4, {}});
        const auto b = solve_skeleton(model, phi, ctrl, g, {SkeletonMethod::picard_truncated, {}});
        double diff = 0.0;
        for (std::size_t i = 0; i < a.values().size(); ++i) diff = std::max(diff, std::abs(a.values()[i] - b.values()[i]));
        CHECK(diff <= 10.0 * g.step);
    }
}

TEST_CASE("picard reports an active truncation") {
    const auto g = make_grid(1.0, 0.01, 1.0);
    const auto model = builtin_model("cubic_const_sigma", 1.0);
    SkeletonConfig cfg{SkeletonMethod::picard_truncated, {}};
    cfg.picard.level = 1.0;
    CHECK_THROWS_AS((void)solve_skeleton(model, test::constant_phi(g, 1.2), test::constant_control(g, 1.0), g, cfg),
                    TruncationActiveError);
}
