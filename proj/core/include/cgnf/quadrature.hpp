#pragma once

#include <functional>
#include <vector>

namespace cgnf {

/// Clenshaw-Curtis rule on [-1, 1]. Nodes are Chebyshev extrema, symmetric
/// about 0; weights are positive and sum to 2.
struct QuadratureRule {
  int n = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Builds the n-point Clenshaw-Curtis rule. n = 1 degenerates to the midpoint
/// rule (node 0, weight 2). Throws InvalidNodeCount for n < 1.
QuadratureRule clenshaw_curtis(int n);

/// Signed integral of f over [0, upper] by affine-mapping the rule's nodes
/// onto the interval. upper < 0 flips orientation. Throws
/// NonFiniteEvaluation if f returns a non-finite value at any node.
double integrate(const std::function<double(double)>& f, double upper,
                 const QuadratureRule& rule);

}  // namespace cgnf
