#include "timgen/numerics/functions.hpp"

#include <algorithm>
#include <cmath>

#include "timgen/errors.hpp"

namespace timgen {

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("softmax: empty input");
  const double top = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - top);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

double softplus(double x) noexcept {
  // max(x, 0) + log1p(e^{-|x|}) is the symmetric form; it never overflows.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double kl_diag_gaussian(std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != sigma.size()) throw InvalidArgument("kl_diag_gaussian: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw InvalidArgument("kl_diag_gaussian: sigma must be positive");
    const double var = sigma[i] * sigma[i];
    total += var + mu[i] * mu[i] - 1.0 - std::log(var);
  }
  return 0.5 * total;
}

std::vector<double> sample_standard_normal(Rng& rng, std::size_t n) {
  if (n == 0) throw InvalidArgument("sample_standard_normal: n must be positive");
  std::vector<double> out(n);
  for (double& x : out) x = rng.normal();
  return out;
}

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> p,
                                         double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_gradient: step must be positive");
  std::vector<double> point(p.begin(), p.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = f(point);
    point[i] = saved - h;
    const double down = f(point);
    point[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_diff_gradient: non-finite evaluation at coordinate " +
                           std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b) noexcept {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace timgen
