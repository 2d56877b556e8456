#include "delayldp/model_file.hpp"

#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "delayldp/expression.hpp"

namespace delayldp {

namespace {

CoefficientModel scalar_model(std::string name, double tau, DriftFn b, DiffusionFn s, DeclaredConstants c) {
    CoefficientModel model;
    model.name = std::move(name);
    model.d = 1;
    model.m = 1;
    model.tau = tau;
    model.drift = std::move(b);
    model.diffusion = std::move(s);
    model.declared = c;
    return model;
}

void cubic_drift(double, std::span<const double> x, std::span<const double> y, std::span<double> out) {
    out[0] = x[0] - x[0] * x[0] * x[0] + y[0];
}

}  // namespace

std::vector<std::string> builtin_names() { return {"cubic_const_sigma", "cubic_quadratic_sigma", "linear_ou"}; }

CoefficientModel builtin_model(std::string_view name, double tau) {
    if (name == "cubic_const_sigma") {
        // monotone ratio <= (1+sqrt 2)/2, coercivity <= 3 at eta = 6.
        return scalar_model(
            "cubic_const_sigma", tau, cubic_drift,
            [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 1.0; },
            DeclaredConstants{3.0, 6.0, 1.0, 1.5, 1.5, 3.0, 1.0, 3.0});
    }
    if (name == "cubic_quadratic_sigma") {
        return scalar_model(
            "cubic_quadratic_sigma", tau, cubic_drift,
            [](double, std::span<const double> x, std::span<const double>, std::span<double> out) {
                out[0] = 0.5 * x[0] * x[0];
            },
            DeclaredConstants{3.0, 6.0, 1.0, 1.5, 1.5, 1.5, 1.0, 4.0});
    }
    if (name == "linear_ou") {
        return scalar_model(
            "linear_ou", tau,
            [](double, std::span<const double> x, std::span<const double>, std::span<double> out) { out[0] = -x[0]; },
            [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 1.0; },
            DeclaredConstants{1.0, 2.0, 1.0, 0.5, 1.0, 1.0, 1.0, 1.0});
    }
    throw ParseError("unknown builtin model '" + std::string(name) + "'");
}

CoefficientModel expression_model(std::size_t d, std::size_t m, double tau, const std::vector<std::string>& b,
                                  const std::vector<std::string>& sigma, const DeclaredConstants& declared) {
    if (b.size() != d) throw ParseError("model: b needs " + std::to_string(d) + " expressions");
    if (sigma.size() != d * m) throw ParseError("model: sigma needs " + std::to_string(d * m) + " expressions");
    std::vector<Expression> bx, sx;
    for (const auto& s : b) bx.push_back(Expression::parse(s, d));
    for (const auto& s : sigma) sx.push_back(Expression::parse(s, d));

    CoefficientModel model;
    model.name = "expression";
    model.d = d;
    model.m = m;
    model.tau = tau;
    model.declared = declared;
    model.drift = [bx](double t, std::span<const double> x, std::span<const double> y, std::span<double> out) {
        for (std::size_t i = 0; i < bx.size(); ++i) out[i] = bx[i].eval(t, x, y);
    };
    model.diffusion = [sx](double t, std::span<const double> x, std::span<const double> y, std::span<double> out) {
        for (std::size_t i = 0; i < sx.size(); ++i) out[i] = sx[i].eval(t, x, y);
    };
    return model;
}

namespace {

double required_number(const toml::table& tbl, std::string_view key, const std::string& path) {
    const auto* node = tbl.get(key);
    if (!node) throw ParseError("model file: missing field '" + path + "'");
    if (auto v = node->value<double>()) return *v;
    throw ParseError("model file: field '" + path + "' must be a number");
}

std::vector<std::string> string_list(const toml::node& node, const std::string& path) {
    std::vector<std::string> out;
    const auto* arr = node.as_array();
    if (!arr) {
        if (auto s = node.value<std::string>()) return {*s};
        throw ParseError("model file: field '" + path + "' must be a string or array of strings");
    }
    for (const auto& item : *arr) {
        if (const auto* row = item.as_array()) {
            for (const auto& cell : *row) {
                auto s = cell.value<std::string>();
                if (!s) throw ParseError("model file: field '" + path + "' must contain strings");
                out.push_back(*s);
            }
        } else if (auto s = item.value<std::string>()) {
            out.push_back(*s);
        } else if (auto v = item.value<double>()) {
            std::ostringstream os;
            os.precision(17);
            os << *v;
            out.push_back(os.str());
        } else {
            throw ParseError("model file: field '" + path + "' must contain strings");
        }
    }
    return out;
}

}  // namespace

CoefficientModel parse_model_text(std::string_view text, const std::string& origin) {
    toml::table root;
    try {
        root = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "model file " << origin << ": " << e.description() << " (line " << e.source().begin.line << ")";
        throw ParseError(msg.str());
    }

    const auto* declared_tbl = root["declared"].as_table();
    if (!declared_tbl) throw ParseError("model file: missing table 'declared'");
    DeclaredConstants c;
    c.q = required_number(*declared_tbl, "q", "declared.q");
    c.eta = required_number(*declared_tbl, "eta", "declared.eta");
    c.K1 = required_number(*declared_tbl, "K1", "declared.K1");
    c.K2 = required_number(*declared_tbl, "K2", "declared.K2");
    c.K3 = required_number(*declared_tbl, "K3", "declared.K3");
    c.K4 = required_number(*declared_tbl, "K4", "declared.K4");
    c.K5 = required_number(*declared_tbl, "K5", "declared.K5");
    c.K6 = required_number(*declared_tbl, "K6", "declared.K6");

    const double tau = required_number(root, "tau", "tau");
    CoefficientModel model;
    if (const auto* builtin = root.get("builtin")) {
        auto name = builtin->value<std::string>();
        if (!name) throw ParseError("model file: field 'builtin' must be a string");
        model = builtin_model(*name, tau);
        model.declared = c;
        if (const auto* d = root.get("d"); d && d->value<std::int64_t>().value_or(-1) != 1) {
            throw ParseError("model file: builtin '" + *name + "' has d = 1");
        }
        if (const auto* m = root.get("m"); m && m->value<std::int64_t>().value_or(-1) != 1) {
            throw ParseError("model file: builtin '" + *name + "' has m = 1");
        }
    } else {
        const auto d = root["d"].value<std::int64_t>();
        const auto m = root["m"].value<std::int64_t>();
        if (!d || *d < 1) throw ParseError("model file: missing or invalid field 'd'");
        if (!m || *m < 1) throw ParseError("model file: missing or invalid field 'm'");
        const auto* b = root.get("b");
        const auto* s = root.get("sigma");
        if (!b) throw ParseError("model file: missing field 'b' (or 'builtin')");
        if (!s) throw ParseError("model file: missing field 'sigma' (or 'builtin')");
        model = expression_model(static_cast<std::size_t>(*d), static_cast<std::size_t>(*m), tau, string_list(*b, "b"),
                                 string_list(*s, "sigma"), c);
    }
    if (auto name = root["name"].value<std::string>()) model.name = *name;
    model.validate();
    return model;
}

CoefficientModel parse_model_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("model file: cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model_text(buf.str(), path.string());
}

}  // namespace delayldp
