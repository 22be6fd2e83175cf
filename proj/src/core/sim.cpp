#include "core/sim.hpp"

#include <cmath>
#include <vector>

#include "core/effects.hpp"
#include "core/errors.hpp"
#include "core/linalg.hpp"
#include "core/rng.hpp"

namespace lgocv {

TemporalData simulate_temporal(std::uint64_t seed, int n, const TemporalSimOptions& opts) {
  if (n < 1) throw_validation(errc::bad_param, "temporal simulation needs n >= 1");
  if (!(std::abs(opts.rho) < 1.0)) {
    throw_validation(errc::bad_param, "temporal simulation needs |rho| < 1");
  }
  if (!(opts.noise_sd >= 0.0)) {
    throw_validation(errc::bad_param, "temporal simulation needs noise_sd >= 0");
  }

  Philox path_rng(seed, 0);
  Philox noise_rng(seed, 1);

  TemporalData out;
  out.x_true.resize(n);
  out.x_tilde.resize(n);
  out.y.resize(n);

  // Start from the stationary law so every prefix has unit marginal variance.
  const double innov_sd = std::sqrt(1.0 - opts.rho * opts.rho);
  out.x_true[0] = path_rng.normal();
  for (int t = 1; t < n; ++t) {
    out.x_true[t] = opts.rho * out.x_true[t - 1] + innov_sd * path_rng.normal();
  }
  for (int t = 0; t < n; ++t) {
    const double x = out.x_true[t];
    out.x_tilde[t] = x * std::abs(x);
    out.y[t] = opts.intercept + x + opts.noise_sd * noise_rng.normal();
  }
  return out;
}

namespace {

// One indicator row per graph component; conditioning a draw from the
// regularized precision on these rows being zero yields an exact draw from
// the intrinsic field restricted to its natural constraint surface.
SpMat component_sum_rows(const Graph& g) {
  const std::vector<int> labels = g.component_labels();
  int components = 0;
  for (int l : labels) components = std::max(components, l + 1);
  std::vector<Triplet> trips;
  trips.reserve(labels.size());
  for (int v = 0; v < g.n(); ++v) trips.emplace_back(labels[v], v, 1.0);
  SpMat c(components, g.n());
  c.setFromTriplets(trips.begin(), trips.end());
  return c;
}

Eigen::VectorXd scaled_icar_draw(const Graph& g, Philox& rng) {
  const std::vector<int> labels = g.component_labels();
  int components = 0;
  for (int l : labels) components = std::max(components, l + 1);

  const SymSparse r = scale_structure(icar_structure(g), components);
  const SpMat c = component_sum_rows(g);
  const SpMat ctc = (SpMat(c.transpose()) * c).pruned();
  const double s = std::max(1.0, r.max_abs_diag());
  SpMat reg = s * ctc;
  SpMat reg_lower = reg.triangularView<Eigen::Lower>();
  const SymSparse q = r + SymSparse::from_lower(std::move(reg_lower));

  const Factor f = Factor::compute(q);
  ConstraintKriging krige(f, c);

  Eigen::VectorXd z(g.n());
  for (int i = 0; i < g.n(); ++i) z[i] = rng.normal();
  return krige.apply_sample(f.sample_with_covariance(z));
}

}  // namespace

LatticeData simulate_lattice(std::uint64_t seed, int rows, int cols,
                             const LatticeSimOptions& opts) {
  if (rows < 1 || cols < 1 || rows * cols < 2) {
    throw_validation(errc::bad_param, "lattice simulation needs at least two cells");
  }
  if (!(opts.spatial_sd >= 0.0)) {
    throw_validation(errc::bad_param, "lattice simulation needs spatial_sd >= 0");
  }
  if (!(opts.expected_lo > 0.0) || !(opts.expected_hi >= opts.expected_lo)) {
    throw_validation(errc::bad_param, "lattice simulation needs 0 < expected_lo <= expected_hi");
  }

  LatticeData out{Graph::rook_lattice(rows, cols), {}, {}, {}, {}};
  const int n = rows * cols;

  // Smooth cosine ramp over the grid, standardized to mean 0, variance 1.
  Eigen::VectorXd z(n);
  const double pi = 3.14159265358979323846;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double zr = rows > 1 ? std::cos(pi * r / (rows - 1)) : 0.0;
      const double zc = cols > 1 ? std::cos(pi * c / (cols - 1)) : 0.0;
      z[r * cols + c] = zr + zc;
    }
  }
  const double mean = z.mean();
  z.array() -= mean;
  const double sd = std::sqrt(z.squaredNorm() / n);
  if (!(sd > 0.0)) throw_validation(errc::bad_param, "covariate surface is constant");
  z /= sd;
  out.covariate = z;

  Philox field_rng(seed, 0);
  Philox exposure_rng(seed, 1);
  Philox count_rng(seed, 2);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  if (opts.spatial_sd > 0.0) u = opts.spatial_sd * scaled_icar_draw(out.graph, field_rng);

  out.log_risk = (opts.intercept + opts.covariate_coef * z.array() + u.array()).matrix();
  out.expected.resize(n);
  out.y.resize(n);
  for (int i = 0; i < n; ++i) {
    out.expected[i] =
        opts.expected_lo + (opts.expected_hi - opts.expected_lo) * exposure_rng.uniform();
    out.y[i] =
        static_cast<double>(count_rng.poisson(out.expected[i] * std::exp(out.log_risk[i])));
  }
  return out;
}

}  // namespace lgocv
