// delayldp command-line front end.
//
//   delayldp check     --model FILE
//   delayldp skeleton  --model FILE --phi V|FILE [--control FILE] --T --h [--method rk4|picard]
//   delayldp simulate  --model FILE --phi V|FILE --eps E --T --h [--scheme] [--seed] [--stream]
//   delayldp rate-eval --model FILE --path FILE
//   delayldp rate-min  --model FILE --phi V|FILE --event SPEC --T --h
//   delayldp mc        --model FILE --phi V|FILE --event SPEC --eps E --n N [--is]
//   delayldp sweep     --model FILE --phi V|FILE --event SPEC --eps-list a,b,... --n N
//
// Artifacts go to --out (stdout when absent); the one-line summary goes to stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "delayldp/core.hpp"
#include "delayldp/csv_io.hpp"
#include "delayldp/errors.hpp"
#include "delayldp/mc.hpp"
#include "delayldp/model_file.hpp"
#include "delayldp/rate.hpp"
#include "delayldp/sdde.hpp"
#include "delayldp/skeleton.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace delayldp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitWarnings = 3;

struct Options {
    std::string model;
    std::optional<double> tau;
    std::string phi = "0";
    std::string control;
    double T = 1.0;
    double h = 0.01;
    std::string method = "rk4";
    double eps = 0.1;
    std::string scheme = "tamed";
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string out;
    std::string csv;
    std::string control_out;
    std::string trajectory_out;
    std::string path;
    std::string event;
    std::size_t n = 10000;
    bool is = false;
    std::string budget = "uniform";
    std::string gradient = "adjoint";
    std::vector<double> eps_list;
    std::optional<double> moment_p;
    std::size_t points = 100000;
    double radius = 5.0;
    bool strict = false;
};

double parse_double(const std::string& s, const std::string& field) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw InputError(field + ": '" + s + "' is not a number");
    }
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

std::vector<double> parse_list(const std::string& s, const std::string& field) {
    std::vector<double> v;
    for (const auto& p : split(s, ',')) v.push_back(parse_double(p, field));
    return v;
}

CoefficientModel load_model(const Options& o) {
    if (o.model.empty()) throw InputError("--model: a model file is required");
    CoefficientModel model;
    if (fs::exists(o.model)) {
        model = parse_model_file(o.model);
    } else {
        bool builtin = false;
        for (const auto& name : builtin_names()) builtin = builtin || name == o.model;
        if (!builtin) throw InputError("--model: file '" + o.model + "' does not exist");
        model = builtin_model(o.model);
    }
    if (o.tau) {
        if (!(*o.tau > 0.0)) throw InputError("--tau: must be positive");
        model.tau = *o.tau;
    }
    return model;
}

TimeGrid load_grid(const Options& o, const CoefficientModel& model) { return make_grid(o.T, o.h, model.tau); }

InitialSegment load_phi(const Options& o, const CoefficientModel& model, const TimeGrid& grid) {
    if (fs::exists(o.phi)) {
        auto phi = read_initial_segment_csv(o.phi, grid);
        if (phi.dim() != model.d) throw InputError("--phi: file has dimension " + std::to_string(phi.dim()) +
                                                   ", model d = " + std::to_string(model.d));
        return phi;
    }
    auto values = parse_list(o.phi, "--phi");
    if (values.size() == 1 && model.d > 1) values.assign(model.d, values[0]);
    if (values.size() != model.d) {
        throw InputError("--phi: expected " + std::to_string(model.d) + " values or a CSV file, got '" + o.phi + "'");
    }
    return InitialSegment::constant(grid, values);
}

Control load_control(const Options& o, const CoefficientModel& model, const TimeGrid& grid) {
    if (o.control.empty()) return Control(grid, model.m);
    if (!fs::exists(o.control)) throw InputError("--control: file '" + o.control + "' does not exist");
    auto ctrl = read_control_csv(o.control, grid);
    if (ctrl.dim() != model.m) throw InputError("--control: dimension differs from model m");
    return ctrl;
}

Scheme parse_scheme(const std::string& s) {
    if (s == "euler") return Scheme::euler;
    if (s == "tamed" || s == "tamed_euler") return Scheme::tamed_euler;
    throw InputError("--scheme: expected 'euler' or 'tamed', got '" + s + "'");
}

// halfspace:<i>:<a>[:+|-]   ball:<r>:<c0,c1,...>   tube:<path.csv>:<r>
EventSpec parse_event(const std::string& spec, const CoefficientModel& model, const TimeGrid& grid) {
    const auto parts = split(spec, ':');
    if (parts.empty() || spec.empty()) throw InputError("--event: an event is required (e.g. halfspace:0:1.0)");
    const std::string& kind = parts[0];
    if (kind == "halfspace") {
        if (parts.size() < 3 || parts.size() > 4) throw InputError("--event: expected halfspace:<i>:<a>[:+|-]");
        const double idx = parse_double(parts[1], "--event index");
        if (idx < 0 || idx != std::floor(idx) || idx >= static_cast<double>(model.d)) {
            throw InputError("--event: component index " + parts[1] + " out of range for d = " + std::to_string(model.d));
        }
        int direction = +1;
        if (parts.size() == 4) {
            if (parts[3] == "-") direction = -1;
            else if (parts[3] != "+") throw InputError("--event: direction must be '+' or '-'");
        }
        return EventSpec{EndpointHalfspace{static_cast<std::size_t>(idx), parse_double(parts[2], "--event threshold"), direction}};
    }
    if (kind == "ball") {
        if (parts.size() != 3) throw InputError("--event: expected ball:<r>:<c0,c1,...>");
        auto center = parse_list(parts[2], "--event center");
        if (center.size() != model.d) throw InputError("--event: ball center needs " + std::to_string(model.d) + " values");
        return EventSpec{EndpointBallExterior{std::move(center), parse_double(parts[1], "--event radius")}};
    }
    if (kind == "tube") {
        if (parts.size() != 3) throw InputError("--event: expected tube:<path.csv>:<r>");
        auto ref = std::make_shared<const Trajectory>(read_trajectory_csv(parts[1]));
        if (!(ref->grid() == grid)) throw InputError("--event: tube reference path is not on the run grid");
        return EventSpec{TubeExit{std::move(ref), parse_double(parts[2], "--event radius")}};
    }
    throw InputError("--event: unknown kind '" + kind + "' (halfspace, ball, tube)");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Writes to `path`, or to stdout when it is empty.
template <class Fn>
void emit(const std::string& path, Fn&& write) {
    if (path.empty()) {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    write(out);
}

void emit_json(const std::string& path, const json& j) {
    emit(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

std::string sibling(const std::string& out, const std::string& suffix) {
    fs::path p(out);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

int finish(const Options& o, const std::vector<std::string>& warnings, const std::string& summary) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << summary << '\n';
    return (o.strict && !warnings.empty()) ? kExitWarnings : kExitOk;
}

// --------------------------------------------------------------------------

int cmd_check(const Options& o) {
    const auto model = load_model(o);
    AssumptionSampler sampler;
    sampler.n_points = o.points;
    sampler.radius = o.radius;
    sampler.seed = o.seed;
    sampler.horizon = o.T;
    const auto report = check_assumptions(model, sampler);
    json j;
    j["model"] = model.name;
    j["n_points"] = report.n_points;
    j["radius"] = sampler.radius;
    json conds = json::array();
    std::vector<std::string> warnings;
    for (const auto& c : report.conditions) {
        conds.push_back({{"id", c.id}, {"worst_ratio", c.worst_ratio}, {"declared", c.declared}, {"pass", c.pass}});
        if (!c.pass) warnings.push_back("condition " + c.id + " fails: sampled " + std::to_string(c.worst_ratio) +
                                        " > declared " + std::to_string(c.declared));
    }
    j["conditions"] = conds;
    j["all_pass"] = report.all_pass();
    j["largest_feasible_eta"] = report.largest_feasible_eta;
    j["gate_threshold"] = report.gate_threshold;
    j["theorem_gate_pass"] = report.theorem_gate_pass;
    emit_json(o.out, j);
    if (!report.theorem_gate_pass) {
        warnings.push_back("largest feasible eta " + std::to_string(report.largest_feasible_eta) +
                           " does not exceed 2q - 1 = " + std::to_string(report.gate_threshold));
    }
    std::ostringstream s;
    s << "check: " << model.name << " all_pass=" << (report.all_pass() ? "true" : "false")
      << " largest_feasible_eta=" << report.largest_feasible_eta
      << " theorem_gate_pass=" << (report.theorem_gate_pass ? "true" : "false");
    return finish(o, warnings, s.str());
}

int cmd_skeleton(const Options& o) {
    const auto model = load_model(o);
    const auto grid = load_grid(o, model);
    const auto phi = load_phi(o, model, grid);
    const auto ctrl = load_control(o, model, grid);
    SkeletonConfig cfg;
    if (o.method == "rk4") cfg.method = SkeletonMethod::steps_rk4;
    else if (o.method == "picard") cfg.method = SkeletonMethod::picard_truncated;
    else throw InputError("--method: expected 'rk4' or 'picard', got '" + o.method + "'");
    const auto z = solve_skeleton(model, phi, ctrl, grid, cfg);
    emit(o.out, [&](std::ostream& out) { write_csv(out, z); });
    std::ostringstream s;
    s << "skeleton: " << grid.n_steps << " steps, sup|z| = " << z.sup_norm_forward()
      << ", apriori_bound = " << apriori_bound(model, phi, ctrl);
    return finish(o, {}, s.str());
}

int cmd_simulate(const Options& o) {
    const auto model = load_model(o);
    const auto grid = load_grid(o, model);
    const auto phi = load_phi(o, model, grid);
    const auto scheme = parse_scheme(o.scheme);
    const bool has_control = !o.control.empty();
    const auto ctrl = load_control(o, model, grid);

    if (o.moment_p) {
        const auto eps_list = o.eps_list.empty() ? std::vector<double>{o.eps} : o.eps_list;
        const auto r = moment_sweep(model, phi, eps_list, *o.moment_p, o.n, grid, scheme, o.seed,
                                    has_control ? std::optional<Control>(ctrl) : std::nullopt);
        emit(o.out, [&](std::ostream& out) {
            out << "eps,p,estimate,stderr,n\n";
            out.precision(17);
            for (const auto& row : r.rows) {
                out << row.eps << ',' << row.p << ',' << row.estimate << ',' << row.std_error << ',' << row.n << '\n';
            }
        });
        double lo = r.rows.front().estimate, hi = lo;
        for (const auto& row : r.rows) lo = std::min(lo, row.estimate), hi = std::max(hi, row.estimate);
        std::ostringstream s;
        s << "simulate: moment p=" << *o.moment_p << " over " << r.rows.size() << " eps values, estimates in [" << lo
          << ", " << hi << "]";
        return finish(o, r.warnings, s.str());
    }

    const RngStream stream{o.seed, o.stream};
    std::ostringstream s;
    if (has_control) {
        const auto run = simulate_controlled(model, phi, o.eps, ctrl, grid, scheme, stream);
        emit(o.out, [&](std::ostream& out) { write_csv(out, run.trajectory); });
        s << "simulate: controlled path, " << grid.n_steps << " steps, log_weight = " << run.log_weight;
    } else {
        const auto path = simulate(model, phi, o.eps, grid, scheme, stream);
        emit(o.out, [&](std::ostream& out) { write_csv(out, path); });
        s << "simulate: " << grid.n_steps << " steps, sup|X| = " << path.sup_norm_forward();
    }
    return finish(o, {}, s.str());
}

int cmd_rate_eval(const Options& o) {
    if (o.path.empty()) throw InputError("--path: a trajectory CSV is required");
    if (!fs::exists(o.path)) throw InputError("--path: file '" + o.path + "' does not exist");
    auto model = load_model(o);
    const auto f = read_trajectory_csv(o.path);
    if (f.dim() != model.d) throw InputError("--path: dimension differs from model d");
    if (std::abs(f.grid().tau - model.tau) > 1e-9 * std::max(1.0, model.tau)) {
        std::ostringstream msg;
        msg << "--path: history length " << f.grid().tau << " differs from model tau " << model.tau;
        throw InputError(msg.str());
    }
    model.tau = f.grid().tau;
    const auto cert = evaluate_rate(model, f, f.grid());
    json j;
    j["value"] = number_or_null(cert.value);
    j["feasible"] = cert.feasible;
    j["max_residual"] = cert.max_residual;
    emit_json(o.out, j);
    if (!o.control_out.empty()) emit(o.control_out, [&](std::ostream& out) { write_csv(out, cert.control); });
    std::ostringstream s;
    s << "rate-eval: value = " << cert.value << ", feasible = " << (cert.feasible ? "true" : "false")
      << ", max_residual = " << cert.max_residual;
    return finish(o, {}, s.str());
}

MinimizeConfig minimize_config(const Options& o) {
    MinimizeConfig cfg;
    if (o.gradient == "adjoint") cfg.gradient = GradientMethod::adjoint;
    else if (o.gradient == "fd") cfg.gradient = GradientMethod::finite_difference;
    else throw InputError("--gradient: expected 'adjoint' or 'fd', got '" + o.gradient + "'");
    return cfg;
}

int cmd_rate_min(const Options& o) {
    const auto model = load_model(o);
    const auto grid = load_grid(o, model);
    const auto phi = load_phi(o, model, grid);
    const auto event = parse_event(o.event, model, grid);
    const auto r = minimize_rate(model, phi, event, grid, minimize_config(o));

    std::string control_out = o.control_out, trajectory_out = o.trajectory_out;
    if (!o.out.empty()) {
        if (control_out.empty()) control_out = sibling(o.out, ".control.csv");
        if (trajectory_out.empty()) trajectory_out = sibling(o.out, ".trajectory.csv");
    }
    json j;
    j["value"] = r.value;
    j["violation"] = r.violation;
    j["converged"] = r.converged;
    j["message"] = r.message;
    j["round_values"] = r.round_values;
    if (!control_out.empty()) j["control_csv"] = control_out;
    if (!trajectory_out.empty()) j["trajectory_csv"] = trajectory_out;
    emit_json(o.out, j);
    if (!control_out.empty()) emit(control_out, [&](std::ostream& out) { write_csv(out, r.control); });
    if (!trajectory_out.empty()) emit(trajectory_out, [&](std::ostream& out) { write_csv(out, r.trajectory); });

    std::ostringstream s;
    s << "rate-min: value = " << r.value << ", violation = " << r.violation
      << ", converged = " << (r.converged ? "true" : "false");
    if (!r.converged) {
        std::cerr << "error: " << r.message << '\n' << s.str() << '\n';
        return kExitNumerical;
    }
    return finish(o, {}, s.str());
}

json estimate_json(const ProbEstimate& e) {
    json j;
    j["p_hat"] = e.p_hat;
    j["log_p_hat"] = number_or_null(e.log_p_hat);
    j["stderr"] = e.std_error;
    j["n"] = e.n;
    j["hits"] = e.hits;
    j["method"] = e.method == EstimateMethod::plain ? "plain" : "importance";
    j["ess"] = e.ess;
    j["warnings"] = e.warnings;
    return j;
}

int cmd_mc(const Options& o) {
    const auto model = load_model(o);
    const auto grid = load_grid(o, model);
    const auto phi = load_phi(o, model, grid);
    const auto event = parse_event(o.event, model, grid);
    const auto scheme = parse_scheme(o.scheme);
    std::optional<Control> is_control;
    std::vector<std::string> warnings;
    if (!o.control.empty()) {
        is_control = load_control(o, model, grid);
    } else if (o.is) {
        const auto opt = minimize_rate(model, phi, event, grid, minimize_config(o));
        if (!opt.converged) warnings.push_back("importance control from a non-converged minimization: " + opt.message);
        is_control = opt.control;
    }
    const auto est = estimate_prob(model, phi, o.eps, event, o.n, grid, scheme, o.seed, is_control);
    emit_json(o.out, estimate_json(est));
    warnings.insert(warnings.end(), est.warnings.begin(), est.warnings.end());
    std::ostringstream s;
    s << "mc: p_hat = " << est.p_hat << " +- " << est.std_error << " (" << est.hits << "/" << est.n << " hits, "
      << (is_control ? "importance" : "plain") << ")";
    return finish(o, warnings, s.str());
}

int cmd_sweep(const Options& o) {
    const auto model = load_model(o);
    const auto grid = load_grid(o, model);
    const auto phi = load_phi(o, model, grid);
    const auto event = parse_event(o.event, model, grid);
    if (o.eps_list.empty()) throw InputError("--eps-list: at least three eps values are required");
    SweepConfig cfg;
    cfg.eps_list = o.eps_list;
    cfg.n_per_eps = o.n;
    cfg.scheme = parse_scheme(o.scheme);
    cfg.seed = o.seed;
    cfg.use_is = o.is;
    if (o.budget == "uniform") cfg.budget = SampleBudget::uniform;
    else if (o.budget == "geometric") cfg.budget = SampleBudget::geometric;
    else throw InputError("--budget: expected 'uniform' or 'geometric', got '" + o.budget + "'");
    cfg.minimize = minimize_config(o);
    const auto r = epsilon_sweep(model, phi, event, grid, cfg);

    if (!o.csv.empty()) {
        emit(o.csv, [&](std::ostream& out) {
            out << "eps,p_hat,stderr,eps_log_p,ess\n";
            out.precision(17);
            for (const auto& row : r.rows) {
                out << row.eps << ',' << row.estimate.p_hat << ',' << row.estimate.std_error << ',';
                if (std::isfinite(row.eps_log_p)) out << row.eps_log_p;
                else out << "-inf";
                out << ',' << row.estimate.ess << '\n';
            }
        });
    }
    json j;
    j["extrapolated_rate"] = r.extrapolated_rate;
    j["rate_stderr"] = r.rate_stderr;
    j["variational_value"] = r.variational_value;
    j["gap"] = r.gap;
    j["slope"] = r.slope;
    j["variational_converged"] = r.variational_converged;
    json rows = json::array();
    for (const auto& row : r.rows) {
        json e = estimate_json(row.estimate);
        e["eps"] = row.eps;
        e["eps_log_p"] = number_or_null(row.eps_log_p);
        e["used_in_fit"] = row.used_in_fit;
        rows.push_back(std::move(e));
    }
    j["rows"] = rows;
    j["warnings"] = r.warnings;
    emit_json(o.out, j);
    std::ostringstream s;
    s << "sweep: extrapolated_rate = " << r.extrapolated_rate << " +- " << r.rate_stderr
      << ", variational_value = " << r.variational_value << ", gap = " << r.gap;
    return finish(o, r.warnings, s.str());
}

// --------------------------------------------------------------------------

void add_model(CLI::App* app, Options& o) {
    app->add_option("--model", o.model, "Model file (TOML) or builtin name")->required();
    app->add_option("--tau", o.tau, "Override the model delay");
}

void add_grid(CLI::App* app, Options& o) {
    app->add_option("--T", o.T, "Horizon")->capture_default_str();
    app->add_option("--h", o.h, "Step size")->capture_default_str();
}

void add_phi(CLI::App* app, Options& o) {
    app->add_option("--phi", o.phi, "Initial segment: constant value(s) 'v0,v1,...' or CSV file")->capture_default_str();
}

void add_event(CLI::App* app, Options& o) {
    app->add_option("--event", o.event, "halfspace:<i>:<a>[:+|-], ball:<r>:<c0,...>, or tube:<path.csv>:<r>")
        ->required();
}

void add_common(CLI::App* app, Options& o) {
    app->add_option("--out", o.out, "Output file (stdout when omitted)");
    app->add_flag("--strict", o.strict, "Exit with code 3 when reliability warnings are raised");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Small-noise delay SDE toolkit: skeletons, rate functions, Monte Carlo"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);
    Options o;
    std::string eps_list;

    auto* check = app.add_subcommand("check", "Sample the structural assumptions of a model");
    add_model(check, o);
    add_common(check, o);
    check->add_option("--points", o.points, "Number of sampled points")->capture_default_str();
    check->add_option("--radius", o.radius, "Half-width of the sampling box")->capture_default_str();
    check->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
    check->add_option("--T", o.T, "Time horizon for sampled t")->capture_default_str();

    auto* skeleton = app.add_subcommand("skeleton", "Solve the controlled skeleton equation");
    add_model(skeleton, o);
    add_grid(skeleton, o);
    add_phi(skeleton, o);
    add_common(skeleton, o);
    skeleton->add_option("--control", o.control, "Control CSV (zero when omitted)");
    skeleton->add_option("--method", o.method, "rk4 or picard")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "Simulate one path, or a moment sweep with --moment");
    add_model(sim, o);
    add_grid(sim, o);
    add_phi(sim, o);
    add_common(sim, o);
    sim->add_option("--eps", o.eps, "Noise intensity")->capture_default_str();
    sim->add_option("--scheme", o.scheme, "euler or tamed")->capture_default_str();
    sim->add_option("--seed", o.seed, "Seed")->capture_default_str();
    sim->add_option("--stream", o.stream, "Stream id")->capture_default_str();
    sim->add_option("--control", o.control, "Control CSV for the controlled dynamics");
    sim->add_option("--moment", o.moment_p, "Estimate E sup|X|^p for this p over --eps-list");
    sim->add_option("--eps-list", eps_list, "Comma-separated eps values for --moment");
    sim->add_option("--n", o.n, "Samples per eps for --moment")->capture_default_str();

    auto* reval = app.add_subcommand("rate-eval", "Evaluate the rate function on a sampled path");
    add_model(reval, o);
    add_common(reval, o);
    reval->add_option("--path", o.path, "Trajectory CSV on [-tau, T]")->required();
    reval->add_option("--control-out", o.control_out, "Write the recovered least-norm control");

    auto* rmin = app.add_subcommand("rate-min", "Minimize the rate function over an endpoint event");
    add_model(rmin, o);
    add_grid(rmin, o);
    add_phi(rmin, o);
    add_event(rmin, o);
    add_common(rmin, o);
    rmin->add_option("--control-out", o.control_out, "Optimal control CSV (default <out>.control.csv)");
    rmin->add_option("--trajectory-out", o.trajectory_out, "Optimal path CSV (default <out>.trajectory.csv)");
    rmin->add_option("--gradient", o.gradient, "adjoint or fd")->capture_default_str();

    auto* mc = app.add_subcommand("mc", "Estimate an event probability");
    add_model(mc, o);
    add_grid(mc, o);
    add_phi(mc, o);
    add_event(mc, o);
    add_common(mc, o);
    mc->add_option("--eps", o.eps, "Noise intensity")->capture_default_str();
    mc->add_option("--n", o.n, "Number of samples")->capture_default_str();
    mc->add_option("--scheme", o.scheme, "euler or tamed")->capture_default_str();
    mc->add_option("--seed", o.seed, "Seed")->capture_default_str();
    mc->add_flag("--is", o.is, "Importance sampling with the minimizing control");
    mc->add_option("--control", o.control, "Importance sampling with this control CSV");
    mc->add_option("--gradient", o.gradient, "adjoint or fd")->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "Estimate the decay rate from an eps sweep");
    add_model(sweep, o);
    add_grid(sweep, o);
    add_phi(sweep, o);
    add_event(sweep, o);
    add_common(sweep, o);
    sweep->add_option("--eps-list", eps_list, "Comma-separated decreasing eps values")->required();
    sweep->add_option("--n", o.n, "Samples per eps")->capture_default_str();
    sweep->add_option("--scheme", o.scheme, "euler or tamed")->capture_default_str();
    sweep->add_option("--seed", o.seed, "Seed")->capture_default_str();
    sweep->add_flag("--is,!--no-is", o.is, "Importance sampling with the minimizing control");
    sweep->add_option("--budget", o.budget, "uniform or geometric")->capture_default_str();
    sweep->add_option("--csv", o.csv, "Per-eps rows as CSV");
    sweep->add_option("--gradient", o.gradient, "adjoint or fd")->capture_default_str();

    if (argc > 1 && argv[1][0] != '-') {
        bool known = false;
        for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == argv[1];
        if (!known) {
            std::cerr << "error: unknown subcommand '" << argv[1]
                      << "' (check, skeleton, simulate, rate-eval, rate-min, mc, sweep)\n";
            return kExitUsage;
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (!eps_list.empty()) o.eps_list = parse_list(eps_list, "--eps-list");
        if (*check) return cmd_check(o);
        if (*skeleton) return cmd_skeleton(o);
        if (*sim) return cmd_simulate(o);
        if (*reval) return cmd_rate_eval(o);
        if (*rmin) return cmd_rate_min(o);
        if (*mc) return cmd_mc(o);
        if (*sweep) return cmd_sweep(o);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}
