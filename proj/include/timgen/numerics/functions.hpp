#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "timgen/numerics/rng.hpp"

namespace timgen {

/// Numerically stable softmax (max subtracted before exponentiation).
/// Throws InvalidArgument on empty input.
std::vector<double> softmax(std::span<const double> v);

/// ln(1 + e^x) without overflow for large |x|.
double softplus(double x) noexcept;

/// d/dx softplus(x), the logistic function.
double sigmoid(double x) noexcept;

/// KL(N(mu, diag sigma^2) || N(0, I)) = 1/2 sum(sigma^2 + mu^2 - 1 - ln sigma^2).
double kl_diag_gaussian(std::span<const double> mu, std::span<const double> sigma);

std::vector<double> sample_standard_normal(Rng& rng, std::size_t n);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate.
/// Throws NumericalError when f returns a non-finite value.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> p,
                                         double h);

/// |a - b| / max(1, |a|, |b|)
double relative_error(double a, double b) noexcept;

}  // namespace timgen
