#pragma once

// Model definition files (TOML):
//
//   d = 1
//   m = 1
//   tau = 1.0
//   builtin = "cubic_const_sigma"        # or: b = ["x - x^3 + y"], sigma = ["1"]
//
//   [declared]
//   q = 3.0
//   eta = 6.0
//   K1 = 1.0  ...  K6 = 3.0
//
// sigma lists the d*m entries row-major (or as d rows of m strings).

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "delayldp/core.hpp"

namespace delayldp {

/// Names accepted by `builtin = ...`.
[[nodiscard]] std::vector<std::string> builtin_names();

/// Built-in model with its default declared constants and tau.
[[nodiscard]] CoefficientModel builtin_model(std::string_view name, double tau = 1.0);

/// Model from expression strings; `sigma` is row-major d*m.
[[nodiscard]] CoefficientModel expression_model(std::size_t d, std::size_t m, double tau,
                                                const std::vector<std::string>& b,
                                                const std::vector<std::string>& sigma,
                                                const DeclaredConstants& declared);

[[nodiscard]] CoefficientModel parse_model_text(std::string_view text, const std::string& origin = "<string>");
[[nodiscard]] CoefficientModel parse_model_file(const std::filesystem::path& path);

}  // namespace delayldp
