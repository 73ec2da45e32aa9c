#pragma once

#include <array>
#include <cstddef>

namespace screenlab {

inline constexpr std::size_t kGaussOrder = 64;

// Gauss-Legendre rule mapped onto [0, 1]. Nodes are ascending and mirror-symmetric:
// nodes[i] + nodes[kGaussOrder - 1 - i] == 1 up to rounding.
struct GaussLegendreRule {
  std::array<double, kGaussOrder> nodes;
  std::array<double, kGaussOrder> weights;
};

const GaussLegendreRule& gauss_legendre_unit();

// Integrates f over [a, b] with `panels` equal-width panels of the unit rule.
template <class F>
double gauss_legendre(F&& f, double a, double b, std::size_t panels = 1) {
  const auto& rule = gauss_legendre_unit();
  const double width = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double left = a + width * static_cast<double>(p);
    double sum = 0.0;
    for (std::size_t g = 0; g < kGaussOrder; ++g) sum += rule.weights[g] * f(left + width * rule.nodes[g]);
    total += sum * width;
  }
  return total;
}

}  // namespace screenlab
