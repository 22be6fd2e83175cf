#include "core/effects.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace lgocv {

namespace {

void check_positive(double tau, const char* what) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw_validation(errc::bad_param, std::string(what) + " must be positive and finite");
  }
}

struct Spectral {
  Eigen::VectorXd values;  // ascending, exact zeros below tolerance
  Eigen::MatrixXd vectors;
  int null_dim = 0;
  double log_gdet = 0.0;         // sum of log positive eigenvalues
  Eigen::MatrixXd null_rows;     // null_dim x n, orthonormal
  std::vector<double> ginv_eigen;  // 1/lambda on the range, 0 on the null space
};

Spectral analyze_structure(const Eigen::MatrixXd& dense) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (dense + dense.transpose()));
  if (es.info() != Eigen::Success) {
    throw_numeric(errc::internal, "structure eigendecomposition failed");
  }
  Spectral out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  const int n = static_cast<int>(out.values.size());
  const double lmax = std::max(std::abs(out.values[0]), std::abs(out.values[n - 1]));
  const double tol = lmax > 0.0 ? 1e-10 * lmax : 1.0;
  out.ginv_eigen.resize(n);
  for (int i = 0; i < n; ++i) {
    if (out.values[i] < -tol) {
      throw_validation(errc::bad_param, "structure matrix has a negative eigenvalue");
    }
    if (out.values[i] <= tol) {
      out.values[i] = 0.0;
      ++out.null_dim;
      out.ginv_eigen[i] = 0.0;
    } else {
      out.log_gdet += std::log(out.values[i]);
      out.ginv_eigen[i] = 1.0 / out.values[i];
    }
  }
  out.null_rows = out.vectors.leftCols(out.null_dim).transpose();
  return out;
}

Eigen::MatrixXd orthonormal_rows(const Eigen::MatrixXd& span_rows, int expected_rank) {
  Eigen::MatrixXd m = span_rows.transpose();  // columns are the spanning vectors
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (rank != expected_rank) {
    throw_numeric(errc::internal, "null-space span rank " + std::to_string(rank) +
                                      " differs from expected " + std::to_string(expected_rank));
  }
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), rank);
  return q.transpose();
}

void check_index(const std::vector<int>& index, int dim, const std::string& name) {
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= dim) {
      throw_validation(errc::index_out_of_range,
                       "effect '" + name + "' index " + std::to_string(index[i] + 1) +
                           " at observation " + std::to_string(i + 1) + " outside 1.." +
                           std::to_string(dim));
    }
  }
}

const Eigen::MatrixXd kEmptyBasis(0, 0);
const std::vector<double> kNoMixing;
const std::vector<std::string> kNoNames;

}  // namespace

const Eigen::MatrixXd& EffectBlock::null_basis() const { return kEmptyBasis; }
const std::vector<double>& EffectBlock::mixing_eigenvalues() const { return kNoMixing; }
const std::vector<std::string>& EffectBlock::component_names() const { return kNoNames; }

// --- builders ----------------------------------------------------------------

SymSparse ar1_precision(int n, double rho, double tau) {
  if (n < 1) throw_validation(errc::bad_param, "ar1 needs n >= 1");
  check_positive(tau, "ar1 marginal precision");
  if (!(std::abs(rho) < 1.0)) {
    throw_validation(errc::bad_param, "ar1 autocorrelation must lie in (-1, 1)");
  }
  std::vector<Triplet> t;
  if (n == 1) {
    t.emplace_back(0, 0, tau);
    return SymSparse::from_triplets(1, t);
  }
  const double s = tau / (1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    const bool interior = i > 0 && i < n - 1;
    t.emplace_back(i, i, interior ? s * (1.0 + rho * rho) : s);
    if (i + 1 < n) t.emplace_back(i + 1, i, -s * rho);
  }
  return SymSparse::from_triplets(n, t);
}

SymSparse rw1_structure(int n) {
  if (n < 2) throw_validation(errc::bad_param, "rw1 needs n >= 2");
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, (i == 0 || i == n - 1) ? 1.0 : 2.0);
    if (i + 1 < n) t.emplace_back(i + 1, i, -1.0);
  }
  return SymSparse::from_triplets(n, t);
}

SymSparse icar_structure(const Graph& g) {
  if (g.edge_count() == 0) {
    throw_validation(errc::empty_graph, "intrinsic CAR structure needs at least one edge");
  }
  std::vector<Triplet> t;
  for (int v = 0; v < g.n(); ++v) {
    t.emplace_back(v, v, static_cast<double>(g.degree(v)));
    for (int w : g.neighbors(v)) {
      if (w < v) t.emplace_back(v, w, -1.0);
    }
  }
  return SymSparse::from_triplets(g.n(), t);
}

double structure_scale_factor(const SymSparse& r, int expected_deficiency) {
  const Spectral sp = analyze_structure(r.dense());
  if (sp.null_dim != expected_deficiency) {
    throw_validation(errc::rank_deficient,
                     "structure null dimension " + std::to_string(sp.null_dim) +
                         " does not match declared " + std::to_string(expected_deficiency));
  }
  const int n = r.n();
  double log_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double m = 0.0;
    for (int k = 0; k < n; ++k) {
      if (sp.ginv_eigen[k] > 0.0) m += sp.vectors(i, k) * sp.vectors(i, k) * sp.ginv_eigen[k];
    }
    if (!(m > 0.0)) {
      throw_validation(errc::bad_param,
                       "structure has a coordinate with zero constrained variance");
    }
    log_sum += std::log(m);
  }
  return std::exp(log_sum / n);
}

SymSparse scale_structure(const SymSparse& r, int expected_deficiency) {
  return r.scaled(structure_scale_factor(r, expected_deficiency));
}

SymSparse bym2_joint(const SymSparse& scaled_structure, double tau, double phi) {
  check_positive(tau, "bym2 precision");
  if (!(phi >= 0.0 && phi < 1.0)) {
    throw_validation(errc::bad_param, "bym2 mixing parameter must lie in [0, 1)");
  }
  const int n = scaled_structure.n();
  const double a = tau / (1.0 - phi);
  const double b = -std::sqrt(tau * phi) / (1.0 - phi);
  const double c = phi / (1.0 - phi);
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, a);
    if (b != 0.0) t.emplace_back(n + i, i, b);
    t.emplace_back(n + i, n + i, c);
  }
  const SpMat& low = scaled_structure.lower();
  for (int j = 0; j < low.outerSize(); ++j) {
    for (SpMat::InnerIterator it(low, j); it; ++it) {
      t.emplace_back(n + static_cast<int>(it.row()), n + j, it.value());
    }
  }
  return SymSparse::from_triplets(2 * n, t);
}

InteractionType interaction_type_from_string(const std::string& s) {
  if (s == "I" || s == "i") return InteractionType::type_i;
  if (s == "II" || s == "ii") return InteractionType::type_ii;
  if (s == "III" || s == "iii") return InteractionType::type_iii;
  if (s == "IV" || s == "iv") return InteractionType::type_iv;
  throw_validation(errc::bad_param, "unknown interaction type: " + s);
}

std::string to_string(InteractionType t) {
  switch (t) {
    case InteractionType::type_i: return "I";
    case InteractionType::type_ii: return "II";
    case InteractionType::type_iii: return "III";
    case InteractionType::type_iv: return "IV";
  }
  return "?";
}

SymSparse kronecker(const SymSparse& a, const SymSparse& b) {
  const SpMat af = a.full();
  const SpMat bf = b.full();
  const int nb = b.n();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(af.nonZeros()) * bf.nonZeros() / 2 + af.nonZeros());
  for (int ja = 0; ja < af.outerSize(); ++ja) {
    for (SpMat::InnerIterator ia(af, ja); ia; ++ia) {
      for (int jb = 0; jb < bf.outerSize(); ++jb) {
        for (SpMat::InnerIterator ib(bf, jb); ib; ++ib) {
          const int row = static_cast<int>(ia.row()) * nb + static_cast<int>(ib.row());
          const int col = ja * nb + jb;
          if (row >= col) t.emplace_back(row, col, ia.value() * ib.value());
        }
      }
    }
  }
  return SymSparse::from_triplets(a.n() * nb, t);
}

SymSparse interaction_structure(InteractionType t, const SymSparse& r_time,
                                const SymSparse& r_space) {
  const int nt = r_time.n();
  const int ns = r_space.n();
  switch (t) {
    case InteractionType::type_i: return SymSparse::identity(nt * ns);
    case InteractionType::type_ii: return kronecker(r_time, SymSparse::identity(ns));
    case InteractionType::type_iii: return kronecker(SymSparse::identity(nt), r_space);
    case InteractionType::type_iv: return kronecker(r_time, r_space);
  }
  throw_validation(errc::bad_param, "unknown interaction type");
}

Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, int k, int degree, double lo, double hi) {
  if (degree < 1) throw_validation(errc::bad_knots, "spline degree must be at least 1");
  const int nseg = k - degree;
  if (nseg < 1) {
    throw_validation(errc::bad_knots, "basis dimension " + std::to_string(k) +
                                          " cannot support degree " + std::to_string(degree));
  }
  if (!(hi > lo)) throw_validation(errc::bad_param, "degenerate coordinate range");
  const double h = (hi - lo) / nseg;
  auto knot = [&](int j) { return lo + (j - degree) * h; };

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(x.size(), k);
  std::vector<double> nvals(degree + 1), left(degree + 1), right(degree + 1);
  for (int r = 0; r < x.size(); ++r) {
    const double u = x[r];
    if (u < lo - 1e-9 * (hi - lo) || u > hi + 1e-9 * (hi - lo)) {
      throw_validation(errc::bad_param, "coordinate outside the basis range");
    }
    int span = degree + static_cast<int>(std::floor((u - lo) / h));
    span = std::clamp(span, degree, k - 1);
    nvals[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = u - knot(span + 1 - j);
      right[j] = knot(span + j) - u;
      double saved = 0.0;
      for (int j2 = 0; j2 < j; ++j2) {
        const double temp = nvals[j2] / (right[j2 + 1] + left[j - j2]);
        nvals[j2] = saved + right[j2 + 1] * temp;
        saved = left[j - j2] * temp;
      }
      nvals[j] = saved;
    }
    for (int j = 0; j <= degree; ++j) basis(r, span - degree + j) = nvals[j];
  }
  return basis;
}

SymSparse difference_penalty(int k, int order) {
  if (order < 1) throw_validation(errc::bad_param, "difference order must be at least 1");
  if (k <= order) {
    throw_validation(errc::bad_knots, "basis dimension " + std::to_string(k) +
                                          " cannot support difference order " +
                                          std::to_string(order));
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(k, k);
  for (int o = 0; o < order; ++o) {
    const int rows = static_cast<int>(d.rows()) - 1;
    Eigen::MatrixXd next(rows, k);
    for (int i = 0; i < rows; ++i) next.row(i) = d.row(i + 1) - d.row(i);
    d = std::move(next);
  }
  return SymSparse::from_dense(d.transpose() * d);
}

SpMat pspline2d_basis(const Eigen::VectorXd& lon, const Eigen::VectorXd& lat, int k_lon,
                      int k_lat, int degree) {
  if (lon.size() != lat.size()) {
    throw_validation(errc::dimension_mismatch, "coordinate columns differ in length");
  }
  const Eigen::MatrixXd b_lon =
      bspline_basis(lon, k_lon, degree, lon.minCoeff(), lon.maxCoeff());
  const Eigen::MatrixXd b_lat =
      bspline_basis(lat, k_lat, degree, lat.minCoeff(), lat.maxCoeff());
  std::vector<Triplet> t;
  t.reserve(lon.size() * (degree + 1) * (degree + 1));
  for (int r = 0; r < lon.size(); ++r) {
    for (int j = 0; j < k_lat; ++j) {
      const double bj = b_lat(r, j);
      if (bj == 0.0) continue;
      for (int i = 0; i < k_lon; ++i) {
        const double bi = b_lon(r, i);
        if (bi != 0.0) t.emplace_back(r, j * k_lon + i, bj * bi);
      }
    }
  }
  SpMat out(lon.size(), k_lon * k_lat);
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

// --- blocks -------------------------------------------------------------------

namespace {

class IidBlock final : public EffectBlock {
 public:
  IidBlock(std::string name, std::vector<int> index, int dim)
      : EffectBlock(std::move(name)), index_(std::move(index)), dim_(dim) {
    if (dim_ < 1) throw_validation(errc::bad_param, "iid effect needs a positive dimension");
    check_index(index_, dim_, this->name());
    slots_ = {{"tau", HyperTransform::log_precision, 1.0}};
  }
  int dim() const override { return dim_; }
  std::span<const HyperSlot> hypers() const override { return slots_; }
  SymSparse precision(std::span<const double> h) const override {
    check_positive(h[0], "iid precision");
    return SymSparse::identity(dim_, h[0]);
  }
  double log_gdet(std::span<const double> h) const override { return dim_ * std::log(h[0]); }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    return {{index_[obs], 1.0}};
  }
  int observation_count() const override { return static_cast<int>(index_.size()); }

 private:
  std::vector<int> index_;
  int dim_;
  std::vector<HyperSlot> slots_;
};

class Ar1Block final : public EffectBlock {
 public:
  Ar1Block(std::string name, std::vector<int> index, int dim)
      : EffectBlock(std::move(name)), index_(std::move(index)), dim_(dim) {
    if (dim_ < 1) throw_validation(errc::bad_param, "ar1 effect needs a positive dimension");
    check_index(index_, dim_, this->name());
    slots_ = {{"tau", HyperTransform::log_precision, 1.0},
              {"rho", HyperTransform::fisher_z, 0.5}};
  }
  int dim() const override { return dim_; }
  std::span<const HyperSlot> hypers() const override { return slots_; }
  SymSparse precision(std::span<const double> h) const override {
    return ar1_precision(dim_, h[1], h[0]);
  }
  double log_gdet(std::span<const double> h) const override {
    // determinant of the stationary AR1 precision in closed form
    return dim_ * std::log(h[0]) - (dim_ - 1) * std::log1p(-h[1] * h[1]);
  }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    return {{index_[obs], 1.0}};
  }
  int observation_count() const override { return static_cast<int>(index_.size()); }

 private:
  std::vector<int> index_;
  int dim_;
  std::vector<HyperSlot> slots_;
};

class Rw1Block final : public EffectBlock {
 public:
  Rw1Block(std::string name, std::vector<int> index, int dim, bool scale)
      : EffectBlock(std::move(name)), index_(std::move(index)), dim_(dim) {
    if (dim_ < 2) throw_validation(errc::bad_param, "rw1 effect needs dimension >= 2");
    check_index(index_, dim_, this->name());
    slots_ = {{"tau", HyperTransform::log_precision, 1.0}};

    // Path-graph spectrum is analytic: lambda_k = 4 sin^2(pi k / 2n) with
    // eigenvectors v_k(j) = sqrt(2/n) cos(pi k (j + 1/2) / n).
    const int n = dim_;
    double kappa_log = 0.0;
    std::vector<double> lambda(n);
    for (int k = 1; k < n; ++k) {
      const double s = std::sin(std::numbers::pi * k / (2.0 * n));
      lambda[k] = 4.0 * s * s;
    }
    if (scale) {
      for (int j = 0; j < n; ++j) {
        double m = 0.0;
        for (int k = 1; k < n; ++k) {
          const double v = std::cos(std::numbers::pi * k * (j + 0.5) / n);
          m += (2.0 / n) * v * v / lambda[k];
        }
        kappa_log += std::log(m);
      }
      kappa_log /= n;
    }
    kappa_ = scale ? std::exp(kappa_log) : 1.0;
    log_gdet_const_ = 0.0;
    for (int k = 1; k < n; ++k) log_gdet_const_ += std::log(kappa_ * lambda[k]);
    structure_ = rw1_structure(n).scaled(kappa_);
    basis_ = Eigen::MatrixXd::Constant(1, n, 1.0 / std::sqrt(static_cast<double>(n)));
  }
  int dim() const override { return dim_; }
  std::span<const HyperSlot> hypers() const override { return slots_; }
  SymSparse precision(std::span<const double> h) const override {
    check_positive(h[0], "rw1 precision");
    return structure_.scaled(h[0]);
  }
  double log_gdet(std::span<const double> h) const override {
    return (dim_ - 1) * std::log(h[0]) + log_gdet_const_;
  }
  int rank_deficiency() const override { return 1; }
  const Eigen::MatrixXd& null_basis() const override { return basis_; }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    return {{index_[obs], 1.0}};
  }
  int observation_count() const override { return static_cast<int>(index_.size()); }

 private:
  std::vector<int> index_;
  int dim_;
  std::vector<HyperSlot> slots_;
  SymSparse structure_;
  double kappa_ = 1.0;
  double log_gdet_const_ = 0.0;
  Eigen::MatrixXd basis_;
};

class IcarBlock final : public EffectBlock {
 public:
  IcarBlock(std::string name, std::vector<int> index, const Graph& g, bool scale)
      : EffectBlock(std::move(name)), index_(std::move(index)), dim_(g.n()) {
    check_index(index_, dim_, this->name());
    slots_ = {{"tau", HyperTransform::log_precision, 1.0}};
    SymSparse r = icar_structure(g);
    deficiency_ = g.component_count();
    if (scale) r = scale_structure(r, deficiency_);
    const Spectral sp = analyze_structure(r.dense());
    if (sp.null_dim != deficiency_) {
      throw_numeric(errc::internal, "icar null dimension mismatch");
    }
    structure_ = std::move(r);
    log_gdet_const_ = sp.log_gdet;
    basis_ = sp.null_rows;
  }
  int dim() const override { return dim_; }
  std::span<const HyperSlot> hypers() const override { return slots_; }
  SymSparse precision(std::span<const double> h) const override {
    check_positive(h[0], "icar precision");
    return structure_.scaled(h[0]);
  }
  double log_gdet(std::span<const double> h) const override {
    return (dim_ - deficiency_) * std::log(h[0]) + log_gdet_const_;
  }
  int rank_deficiency() const override { return deficiency_; }
  const Eigen::MatrixXd& null_basis() const override { return basis_; }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    return {{index_[obs], 1.0}};
  }
  int observation_count() const override { return static_cast<int>(index_.size()); }

 private:
  std::vector<int> index_;
  int dim_;
  int deficiency_ = 1;
  std::vector<HyperSlot> slots_;
  SymSparse structure_;
  double log_gdet_const_ = 0.0;
  Eigen::MatrixXd basis_;
};

class Bym2Block final : public EffectBlock {
 public:
  Bym2Block(std::string name, std::vector<int> index, const Graph& g)
      : EffectBlock(std::move(name)), index_(std::move(index)), n_(g.n()) {
    check_index(index_, n_, this->name());
    if (g.component_count() != 1) {
      throw_validation(errc::disconnected_graph,
                       "the convolution effect requires a connected graph");
    }
    slots_ = {{"tau", HyperTransform::log_precision, 1.0},
              {"phi", HyperTransform::logit_unit, 0.5}};
    structure_ = scale_structure(icar_structure(g), 1);
    const Spectral sp = analyze_structure(structure_.dense());
    log_gdet_structure_ = sp.log_gdet;
    mixing_eigen_ = sp.ginv_eigen;
    basis_ = Eigen::MatrixXd::Zero(1, 2 * n_);
    basis_.row(0).tail(n_).setConstant(1.0 / std::sqrt(static_cast<double>(n_)));
  }
  int dim() const override { return 2 * n_; }
  std::span<const HyperSlot> hypers() const override { return slots_; }
  SymSparse precision(std::span<const double> h) const override {
    return bym2_joint(structure_, h[0], h[1]);
  }
  double log_gdet(std::span<const double> h) const override {
    // generative normalizer: composite block contributes (tau/(1-phi))^n,
    // the structured copy its scaled generalized determinant
    return n_ * (std::log(h[0]) - std::log1p(-h[1])) + log_gdet_structure_;
  }
  int rank_deficiency() const override { return 1; }
  const Eigen::MatrixXd& null_basis() const override { return basis_; }
  const std::vector<double>& mixing_eigenvalues() const override { return mixing_eigen_; }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    return {{index_[obs], 1.0}};
  }
  int observation_count() const override { return static_cast<int>(index_.size()); }

 private:
  std::vector<int> index_;
  int n_;
  std::vector<HyperSlot> slots_;
  SymSparse structure_;
  double log_gdet_structure_ = 0.0;
  std::vector<double> mixing_eigen_;
  Eigen::MatrixXd basis_;
};

class Pspline2dBlock final : public EffectBlock {
 public:
  Pspline2dBlock(std::string name, const Eigen::VectorXd& lon, const Eigen::VectorXd& lat,
                 int k_lon, int k_lat, int degree, int order)
      : EffectBlock(std::move(name)), k_lon_(k_lon), k_lat_(k_lat) {
    basis_rows_ = pspline2d_basis(lon, lat, k_lon, k_lat, degree);
    row_access_ = basis_rows_;
    slots_ = {{"tau_lon", HyperTransform::log_precision, 1.0},
              {"tau_lat", HyperTransform::log_precision, 1.0}};

    const Spectral sp_lon = analyze_structure(difference_penalty(k_lon, order).dense());
    const Spectral sp_lat = analyze_structure(difference_penalty(k_lat, order).dense());
    lambda_lon_ = sp_lon.values;
    lambda_lat_ = sp_lat.values;
    deficiency_ = sp_lon.null_dim * sp_lat.null_dim;

    // penalty parts: tau_lon (I_lat x D'D_lon) + tau_lat (D'D_lat x I_lon)
    part_lon_ = kronecker(SymSparse::identity(k_lat), difference_penalty(k_lon, order));
    part_lat_ = kronecker(difference_penalty(k_lat, order), SymSparse::identity(k_lon));

    // null basis: products of marginal null eigenvectors (lon index fastest)
    null_ = Eigen::MatrixXd::Zero(deficiency_, k_lon * k_lat);
    int r = 0;
    for (int b = 0; b < sp_lat.null_dim; ++b) {
      for (int a = 0; a < sp_lon.null_dim; ++a, ++r) {
        for (int j = 0; j < k_lat; ++j) {
          for (int i = 0; i < k_lon; ++i) {
            null_(r, j * k_lon + i) = sp_lat.vectors(j, b) * sp_lon.vectors(i, a);
          }
        }
      }
    }
  }
  int dim() const override { return k_lon_ * k_lat_; }
  std::span<const HyperSlot> hypers() const override { return slots_; }
  SymSparse precision(std::span<const double> h) const override {
    check_positive(h[0], "spline penalty precision");
    check_positive(h[1], "spline penalty precision");
    return part_lon_.scaled(h[0]) + part_lat_.scaled(h[1]);
  }
  double log_gdet(std::span<const double> h) const override {
    double s = 0.0;
    for (int j = 0; j < k_lat_; ++j) {
      for (int i = 0; i < k_lon_; ++i) {
        const double v = h[0] * lambda_lon_[i] + h[1] * lambda_lat_[j];
        if (lambda_lon_[i] > 0.0 || lambda_lat_[j] > 0.0) s += std::log(v);
      }
    }
    return s;
  }
  int rank_deficiency() const override { return deficiency_; }
  const Eigen::MatrixXd& null_basis() const override { return null_; }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    std::vector<std::pair<int, double>> out;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(row_access_, obs); it;
         ++it) {
      out.emplace_back(static_cast<int>(it.col()), it.value());
    }
    return out;
  }
  int observation_count() const override { return static_cast<int>(basis_rows_.rows()); }

 private:
  int k_lon_, k_lat_;
  int deficiency_ = 0;
  std::vector<HyperSlot> slots_;
  SpMat basis_rows_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> row_access_;
  Eigen::VectorXd lambda_lon_, lambda_lat_;
  SymSparse part_lon_, part_lat_;
  Eigen::MatrixXd null_;
};

class InteractionBlock final : public EffectBlock {
 public:
  InteractionBlock(std::string name, std::vector<int> time_index, std::vector<int> space_index,
                   int time_dim, const Graph& g, InteractionType type)
      : EffectBlock(std::move(name)),
        time_index_(std::move(time_index)),
        space_index_(std::move(space_index)),
        nt_(time_dim),
        ns_(g.n()),
        type_(type) {
    if (time_index_.size() != space_index_.size()) {
      throw_validation(errc::dimension_mismatch, "interaction index columns differ in length");
    }
    check_index(time_index_, nt_, this->name());
    check_index(space_index_, ns_, this->name());
    slots_ = {{"tau", HyperTransform::log_precision, 1.0}};

    const SymSparse r_time = nt_ >= 2 ? scale_structure(rw1_structure(nt_), 1) : SymSparse::identity(1);
    const SymSparse r_space = scale_structure(icar_structure(g), g.component_count());
    structure_ = interaction_structure(type, r_time, r_space);

    const Spectral sp_t = analyze_structure(r_time.dense());
    const Spectral sp_s = analyze_structure(r_space.dense());
    const int dt = sp_t.null_dim;
    const int ds = sp_s.null_dim;

    switch (type) {
      case InteractionType::type_i:
        deficiency_ = 0;
        log_gdet_const_ = 0.0;
        break;
      case InteractionType::type_ii: {
        deficiency_ = ns_ * dt;
        log_gdet_const_ = ns_ * sp_t.log_gdet;
        Eigen::MatrixXd span_rows(deficiency_, nt_ * ns_);
        int r = 0;
        for (int a = 0; a < dt; ++a) {
          for (int s = 0; s < ns_; ++s, ++r) {
            span_rows.row(r).setZero();
            for (int t = 0; t < nt_; ++t) span_rows(r, t * ns_ + s) = sp_t.vectors(t, a);
          }
        }
        null_ = span_rows;  // already orthonormal
        break;
      }
      case InteractionType::type_iii: {
        deficiency_ = nt_ * ds;
        log_gdet_const_ = nt_ * sp_s.log_gdet;
        Eigen::MatrixXd span_rows(deficiency_, nt_ * ns_);
        int r = 0;
        for (int b = 0; b < ds; ++b) {
          for (int t = 0; t < nt_; ++t, ++r) {
            span_rows.row(r).setZero();
            for (int s = 0; s < ns_; ++s) span_rows(r, t * ns_ + s) = sp_s.vectors(s, b);
          }
        }
        null_ = span_rows;
        break;
      }
      case InteractionType::type_iv: {
        deficiency_ = ns_ * dt + nt_ * ds - dt * ds;
        log_gdet_const_ = 0.0;
        for (int i = 0; i < nt_; ++i) {
          if (sp_t.values[i] <= 0.0) continue;
          for (int j = 0; j < ns_; ++j) {
            if (sp_s.values[j] <= 0.0) continue;
            log_gdet_const_ += std::log(sp_t.values[i] * sp_s.values[j]);
          }
        }
        Eigen::MatrixXd span_rows(ns_ * dt + nt_ * ds, nt_ * ns_);
        span_rows.setZero();
        int r = 0;
        for (int a = 0; a < dt; ++a) {
          for (int s = 0; s < ns_; ++s, ++r) {
            for (int t = 0; t < nt_; ++t) span_rows(r, t * ns_ + s) = sp_t.vectors(t, a);
          }
        }
        for (int b = 0; b < ds; ++b) {
          for (int t = 0; t < nt_; ++t, ++r) {
            for (int s = 0; s < ns_; ++s) span_rows(r, t * ns_ + s) = sp_s.vectors(s, b);
          }
        }
        null_ = orthonormal_rows(span_rows, deficiency_);
        break;
      }
    }
  }
  int dim() const override { return nt_ * ns_; }
  std::span<const HyperSlot> hypers() const override { return slots_; }
  SymSparse precision(std::span<const double> h) const override {
    check_positive(h[0], "interaction precision");
    return structure_.scaled(h[0]);
  }
  double log_gdet(std::span<const double> h) const override {
    return (dim() - deficiency_) * std::log(h[0]) + log_gdet_const_;
  }
  int rank_deficiency() const override { return deficiency_; }
  const Eigen::MatrixXd& null_basis() const override { return null_; }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    return {{time_index_[obs] * ns_ + space_index_[obs], 1.0}};
  }
  int observation_count() const override { return static_cast<int>(time_index_.size()); }

 private:
  std::vector<int> time_index_, space_index_;
  int nt_, ns_;
  InteractionType type_;
  int deficiency_ = 0;
  std::vector<HyperSlot> slots_;
  SymSparse structure_;
  double log_gdet_const_ = 0.0;
  Eigen::MatrixXd null_;
};

class CoefBlock final : public EffectBlock {
 public:
  CoefBlock(std::string name, std::vector<Eigen::VectorXd> columns,
            std::vector<std::string> column_names, double precision)
      : EffectBlock(std::move(name)),
        columns_(std::move(columns)),
        names_(std::move(column_names)),
        precision_(precision) {
    if (columns_.empty()) throw_validation(errc::bad_param, "coefficient block needs columns");
    if (names_.size() != columns_.size()) {
      throw_validation(errc::dimension_mismatch, "coefficient names do not match columns");
    }
    check_positive(precision_, "coefficient precision");
    for (const auto& c : columns_) {
      if (c.size() != columns_[0].size()) {
        throw_validation(errc::dimension_mismatch, "coefficient columns differ in length");
      }
    }
  }
  int dim() const override { return static_cast<int>(columns_.size()); }
  std::span<const HyperSlot> hypers() const override { return {}; }
  SymSparse precision(std::span<const double>) const override {
    return SymSparse::identity(dim(), precision_);
  }
  double log_gdet(std::span<const double>) const override {
    return dim() * std::log(precision_);
  }
  std::vector<std::pair<int, double>> design_entries(int obs) const override {
    std::vector<std::pair<int, double>> out;
    for (int j = 0; j < dim(); ++j) {
      const double v = columns_[j][obs];
      if (v != 0.0) out.emplace_back(j, v);
    }
    return out;
  }
  int observation_count() const override { return static_cast<int>(columns_[0].size()); }
  const std::vector<std::string>& component_names() const override { return names_; }

 private:
  std::vector<Eigen::VectorXd> columns_;
  std::vector<std::string> names_;
  double precision_;
};

}  // namespace

BlockPtr make_iid_block(std::string name, std::vector<int> index, int dim) {
  return std::make_unique<IidBlock>(std::move(name), std::move(index), dim);
}
BlockPtr make_ar1_block(std::string name, std::vector<int> index, int dim) {
  return std::make_unique<Ar1Block>(std::move(name), std::move(index), dim);
}
BlockPtr make_rw1_block(std::string name, std::vector<int> index, int dim, bool scale) {
  return std::make_unique<Rw1Block>(std::move(name), std::move(index), dim, scale);
}
BlockPtr make_icar_block(std::string name, std::vector<int> index, const Graph& g, bool scale) {
  return std::make_unique<IcarBlock>(std::move(name), std::move(index), g, scale);
}
BlockPtr make_bym2_block(std::string name, std::vector<int> index, const Graph& g) {
  return std::make_unique<Bym2Block>(std::move(name), std::move(index), g);
}
BlockPtr make_pspline2d_block(std::string name, const Eigen::VectorXd& lon,
                              const Eigen::VectorXd& lat, int k_lon, int k_lat, int degree,
                              int penalty_order) {
  return std::make_unique<Pspline2dBlock>(std::move(name), lon, lat, k_lon, k_lat, degree,
                                          penalty_order);
}
BlockPtr make_interaction_block(std::string name, std::vector<int> time_index,
                                std::vector<int> space_index, int time_dim, const Graph& g,
                                InteractionType type) {
  return std::make_unique<InteractionBlock>(std::move(name), std::move(time_index),
                                            std::move(space_index), time_dim, g, type);
}
BlockPtr make_coef_block(std::string name, std::vector<Eigen::VectorXd> columns,
                         std::vector<std::string> column_names, double precision) {
  return std::make_unique<CoefBlock>(std::move(name), std::move(columns),
                                     std::move(column_names), precision);
}

}  // namespace lgocv
