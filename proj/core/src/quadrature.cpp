#include "cgnf/quadrature.hpp"

#include <cmath>

#include "cgnf/errors.hpp"

namespace cgnf {

QuadratureRule clenshaw_curtis(int n) {
  if (n < 1) throw InvalidNodeCount("node count must be >= 1, got " + std::to_string(n));
  QuadratureRule rule;
  rule.n = n;
  rule.nodes.resize(n);
  rule.weights.assign(n, 0.0);
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 2.0;
    return rule;
  }
  const int big_n = n - 1;
  const double pi = std::acos(-1.0);
  for (int j = 0; j <= big_n; ++j) rule.nodes[j] = std::cos(j * pi / big_n);

  // Weights per Trefethen's clencurt: endpoint weights closed-form, interior
  // weights from the cosine series of 2/(1-x^2).
  const double end_w = (big_n % 2 == 0) ? 1.0 / (double(big_n) * big_n - 1.0)
                                        : 1.0 / (double(big_n) * big_n);
  rule.weights[0] = end_w;
  rule.weights[big_n] = end_w;
  for (int j = 1; j < big_n; ++j) {
    const double theta = j * pi / big_n;
    double v = 1.0;
    for (int k = 1; k <= big_n / 2; ++k) {
      const bool last_even = (big_n % 2 == 0) && (2 * k == big_n);
      const double term = 2.0 * std::cos(2.0 * k * theta) / (4.0 * k * k - 1.0);
      v -= last_even ? 0.5 * term : term;
    }
    rule.weights[j] = 2.0 * v / big_n;
  }
  return rule;
}

double integrate(const std::function<double(double)>& f, double upper,
                 const QuadratureRule& rule) {
  const double half = 0.5 * upper;
  double acc = 0.0;
  for (int j = 0; j < rule.n; ++j) {
    const double t = half * (rule.nodes[j] + 1.0);
    const double y = f(t);
    if (!std::isfinite(y))
      throw NonFiniteEvaluation("integrand returned non-finite value at t=" +
                                std::to_string(t));
    acc += rule.weights[j] * y;
  }
  return half * acc;
}

}  // namespace cgnf
