#include "core/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace lgocv {

namespace {

// Orthonormal Hermite recurrence value and derivative prefactor at x. The
// polynomials grow like exp(x^2/2) near the extreme roots, so the returned
// magnitudes stay representable and the derived weights keep full relative
// accuracy far into the tails (eigenvector-based weights do not).
struct HermiteEval {
  double p;   // p_n(x)
  double pp;  // p_n'(x)
};

HermiteEval hermite_orthonormal(int n, double x) {
  double p1 = std::pow(std::numbers::pi, -0.25);
  double p2 = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = x * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
  }
  return {p1, std::sqrt(2.0 * n) * p2};
}

}  // namespace

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw_validation(errc::bad_param, "quadrature needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);

  const int half = (n + 1) / 2;
  double z = 0.0;
  double z_first = 0.0, z_second = 0.0;
  for (int i = 0; i < half; ++i) {
    // tail-inward initial guesses, then Newton on the recurrence
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * z_second;
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * z_second;
    } else {
      z = 2.0 * z - z_second;
    }
    HermiteEval h{};
    bool converged = false;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 60; ++it) {
      h = hermite_orthonormal(n, z);
      const double dz = h.p / h.pp;
      z -= dz;
      const double adz = std::abs(dz);
      if (adz <= 1e-14 * (1.0 + std::abs(z)) || (it > 3 && adz >= prev)) {
        converged = true;
        break;
      }
      prev = adz;
    }
    if (!converged) throw_numeric(errc::internal, "quadrature root search stalled");
    h = hermite_orthonormal(n, z);
    z_second = z_first;
    z_first = z;
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    const double w = 2.0 / (h.pp * h.pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[half - 1] = 0.0;
  return rule;
}

}  // namespace lgocv
