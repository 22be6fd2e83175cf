#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>

namespace lgocv {

// Gauss-Hermite rule for weight exp(-x^2) on the real line (physicists'
// convention): integral f(x) exp(-x^2) dx = sum w_i f(x_i).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

QuadratureRule gauss_hermite(int n);

// log of E[exp(log_f(Z))] for Z ~ N(mean, var), evaluated stably with
// log-sum-exp over the transformed rule.
template <typename LogF>
double gh_log_expectation(const QuadratureRule& rule, double mean, double var, LogF&& log_f) {
  const double sd = std::sqrt(var);
  const int n = static_cast<int>(rule.nodes.size());
  double max_term = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd terms(n);
  for (int i = 0; i < n; ++i) {
    const double x = mean + std::numbers::sqrt2 * sd * rule.nodes[i];
    terms[i] = std::log(rule.weights[i]) + log_f(x);
    max_term = std::max(max_term, terms[i]);
  }
  if (!std::isfinite(max_term)) return max_term;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(terms[i] - max_term);
  // 1/sqrt(pi) normalizes the Gaussian change of variables.
  return max_term + std::log(s) - 0.5 * std::log(std::numbers::pi);
}

// E[g(Z)] for Z ~ N(mean, var) on the natural scale.
template <typename G>
double gh_expectation(const QuadratureRule& rule, double mean, double var, G&& g) {
  const double sd = std::sqrt(var);
  double s = 0.0;
  for (int i = 0; i < rule.nodes.size(); ++i) {
    const double x = mean + std::numbers::sqrt2 * sd * rule.nodes[i];
    s += rule.weights[i] * g(x);
  }
  return s / std::sqrt(std::numbers::pi);
}

}  // namespace lgocv
