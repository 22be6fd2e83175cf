#include "core/linalg.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <string>

#include "core/errors.hpp"

namespace lgocv {

namespace {

SpMat compress_lower(SpMat lower) {
  lower.prune([](int, int, double v) { return v != 0.0; });
  lower.makeCompressed();
  return lower;
}

}  // namespace

SymSparse SymSparse::from_triplets(int n, std::span<const Triplet> entries) {
  if (n <= 0) throw_validation(errc::bad_param, "matrix dimension must be positive");
  std::vector<Triplet> folded;
  folded.reserve(entries.size());
  for (const auto& t : entries) {
    if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n) {
      throw_validation(errc::index_out_of_range,
                       "triplet (" + std::to_string(t.row()) + "," + std::to_string(t.col()) +
                           ") outside " + std::to_string(n) + "x" + std::to_string(n));
    }
    folded.emplace_back(std::max(t.row(), t.col()), std::min(t.row(), t.col()), t.value());
  }
  SpMat lower(n, n);
  lower.setFromTriplets(folded.begin(), folded.end());
  SymSparse out;
  out.lower_ = compress_lower(std::move(lower));
  return out;
}

SymSparse SymSparse::from_lower(SpMat lower) {
  if (lower.rows() != lower.cols()) {
    throw_validation(errc::dimension_mismatch, "lower triangle must be square");
  }
  SymSparse out;
  out.lower_ = compress_lower(std::move(lower));
  return out;
}

SymSparse SymSparse::from_dense(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw_validation(errc::dimension_mismatch, "matrix must be square");
  std::vector<Triplet> t;
  for (int j = 0; j < m.cols(); ++j) {
    for (int i = j; i < m.rows(); ++i) {
      if (m(i, j) != 0.0) t.emplace_back(i, j, m(i, j));
    }
  }
  return from_triplets(static_cast<int>(m.rows()), t);
}

SymSparse SymSparse::identity(int n, double scale) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, scale);
  return from_triplets(n, t);
}

SpMat SymSparse::full() const {
  SpMat out = lower_.selfadjointView<Eigen::Lower>();
  out.makeCompressed();
  return out;
}

Eigen::MatrixXd SymSparse::dense() const { return Eigen::MatrixXd(full()); }

double SymSparse::max_abs_diag() const {
  double m = 0.0;
  for (int j = 0; j < lower_.outerSize(); ++j) {
    for (SpMat::InnerIterator it(lower_, j); it; ++it) {
      if (it.row() == it.col()) m = std::max(m, std::abs(it.value()));
    }
  }
  return m;
}

SymSparse SymSparse::scaled(double s) const {
  SymSparse out;
  out.lower_ = compress_lower(SpMat(s * lower_));
  return out;
}

SymSparse SymSparse::shifted_diag(double s) const {
  SpMat id(n(), n());
  id.setIdentity();
  SymSparse out;
  out.lower_ = compress_lower(SpMat(lower_ + s * id));
  return out;
}

SymSparse operator+(const SymSparse& a, const SymSparse& b) {
  if (a.n() != b.n()) throw_validation(errc::dimension_mismatch, "size mismatch in matrix sum");
  SymSparse out;
  out.lower_ = compress_lower(SpMat(a.lower_ + b.lower_));
  return out;
}

// ---------------------------------------------------------------------------

struct Factor::Impl {
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  int n = 0;
  double log_det = 0.0;
  RankFlag flag = RankFlag::full;
  int deficiency = 0;
  double jitter = 0.0;
  mutable std::unique_ptr<PartialInverse> pinv;
};

Factor::Factor() : impl_(std::make_unique<Impl>()) {}
Factor::Factor(Factor&&) noexcept = default;
Factor& Factor::operator=(Factor&&) noexcept = default;
Factor::~Factor() = default;

Factor Factor::compute(const SymSparse& m, const FactorOptions& opts) {
  Factor f;
  Impl& im = *f.impl_;
  im.n = m.n();
  const double scale = m.max_abs_diag() > 0.0 ? m.max_abs_diag() : 1.0;
  const double pivot_tol = opts.pivot_rel_tol * scale;

  auto attempt = [&](double shift, int& small_pivots) -> bool {
    const SymSparse shifted = shift > 0.0 ? m.shifted_diag(shift) : m;
    im.ldlt.compute(shifted.lower());
    small_pivots = -1;
    if (im.ldlt.info() != Eigen::Success) return false;
    const auto& d = im.ldlt.vectorD();
    small_pivots = 0;
    for (int i = 0; i < d.size(); ++i) {
      if (!(d[i] >= pivot_tol)) ++small_pivots;
    }
    return small_pivots == 0;
  };

  int small_pivots = -1;
  if (attempt(0.0, small_pivots)) {
    im.flag = RankFlag::full;
    im.deficiency = 0;
    im.jitter = 0.0;
    im.log_det = im.ldlt.vectorD().array().log().sum();
    return f;
  }
  const int first_deficiency = small_pivots;  // -1 when the clean attempt broke down

  for (double rung : opts.jitter_ladder) {
    int ignored = -1;
    if (attempt(rung * scale, ignored)) {
      im.flag = RankFlag::deficient;
      im.deficiency = first_deficiency;
      im.jitter = rung * scale;
      im.log_det = im.ldlt.vectorD().array().log().sum();
      return f;
    }
  }
  throw_numeric(errc::not_factorizable,
                "matrix not positive definite within jitter ladder (n=" + std::to_string(im.n) +
                    ")");
}

int Factor::n() const { return impl_->n; }
double Factor::log_det() const { return impl_->log_det; }
RankFlag Factor::rank_flag() const { return impl_->flag; }
int Factor::deficiency() const { return impl_->deficiency; }
double Factor::jitter() const { return impl_->jitter; }

Eigen::VectorXd Factor::solve(const Eigen::VectorXd& b) const {
  if (b.size() != impl_->n) {
    throw_validation(errc::dimension_mismatch,
                     "rhs length " + std::to_string(b.size()) + " vs n " + std::to_string(impl_->n));
  }
  return impl_->ldlt.solve(b);
}

Eigen::MatrixXd Factor::solve(const Eigen::MatrixXd& b) const {
  if (b.rows() != impl_->n) {
    throw_validation(errc::dimension_mismatch,
                     "rhs rows " + std::to_string(b.rows()) + " vs n " + std::to_string(impl_->n));
  }
  return impl_->ldlt.solve(b);
}

Eigen::VectorXd Factor::sample_with_covariance(const Eigen::VectorXd& z) const {
  if (z.size() != impl_->n) throw_validation(errc::dimension_mismatch, "noise length mismatch");
  Eigen::VectorXd w = z.array() / impl_->ldlt.vectorD().array().sqrt();
  Eigen::VectorXd y = impl_->ldlt.matrixU().solve(w);
  return impl_->ldlt.permutationPinv() * y;
}

// ---------------------------------------------------------------------------
// Takahashi selected inverse: with M = P' (L D L') P, the recurrences
//   S_ij = -sum_k L_kj S_ik          (i > j, k over column j of L)
//   S_jj = 1/d_j - sum_k L_kj S_kj
// visit columns from last to first and stay exact on the pattern of L + L'
// because that pattern is closed under the fill rule.

const double* PartialInverse::find(int pi, int pj) const {
  const int lo = col_ptr_[pj];
  const int hi = col_ptr_[pj + 1];
  const int* first = row_idx_.data() + lo;
  const int* last = row_idx_.data() + hi;
  const int* it = std::lower_bound(first, last, pi);
  if (it != last && *it == pi) return val_.data() + (it - row_idx_.data());
  return nullptr;
}

double PartialInverse::variance(int i) const {
  if (i < 0 || i >= n_) throw_validation(errc::index_out_of_range, "variance index out of range");
  return diag_[perm_[i]];
}

bool PartialInverse::covers(int i, int j) const {
  if (i < 0 || i >= n_ || j < 0 || j >= n_) return false;
  if (i == j) return true;
  const int pi = perm_[i], pj = perm_[j];
  return find(std::max(pi, pj), std::min(pi, pj)) != nullptr;
}

double PartialInverse::covariance(int i, int j) const {
  if (i < 0 || i >= n_ || j < 0 || j >= n_) {
    throw_validation(errc::index_out_of_range, "covariance index out of range");
  }
  if (i == j) return diag_[perm_[i]];
  const int pi = perm_[i], pj = perm_[j];
  const double* p = find(std::max(pi, pj), std::min(pi, pj));
  if (!p) {
    throw_validation(errc::index_out_of_range,
                     "pair (" + std::to_string(i) + "," + std::to_string(j) +
                         ") outside the selected-inverse pattern");
  }
  return *p;
}

const PartialInverse& Factor::partial_inverse() const {
  if (impl_->pinv) return *impl_->pinv;

  const int n = impl_->n;
  auto pinv = std::make_unique<PartialInverse>();
  pinv->n_ = n;

  // Derive original -> factored index map from the same permutation operator
  // the solver applies, so no assumption on index conventions is needed.
  Eigen::VectorXd iota(n);
  for (int i = 0; i < n; ++i) iota[i] = i;
  Eigen::VectorXd permuted = impl_->ldlt.permutationP() * iota;
  pinv->perm_.assign(n, 0);
  for (int k = 0; k < n; ++k) pinv->perm_[static_cast<int>(permuted[k])] = k;

  // Materialize L and keep the strictly lower pattern (unit diagonal implied).
  SpMat l(impl_->ldlt.matrixL());
  l.makeCompressed();
  std::vector<int> col_ptr(n + 1, 0);
  std::vector<int> rows;
  std::vector<double> lval;
  rows.reserve(l.nonZeros());
  lval.reserve(l.nonZeros());
  for (int j = 0; j < n; ++j) {
    col_ptr[j] = static_cast<int>(rows.size());
    for (SpMat::InnerIterator it(l, j); it; ++it) {
      if (it.row() > j) {
        rows.push_back(static_cast<int>(it.row()));
        lval.push_back(it.value());
      }
    }
  }
  col_ptr[n] = static_cast<int>(rows.size());

  pinv->col_ptr_ = col_ptr;
  pinv->row_idx_ = rows;
  pinv->val_.assign(rows.size(), 0.0);
  pinv->diag_.assign(n, 0.0);

  const auto& d = impl_->ldlt.vectorD();
  auto lookup = [&](int a, int b) -> double {  // S at (a,b), a >= b, factored indices
    if (a == b) return pinv->diag_[a];
    const double* p = pinv->find(a, b);
    return p ? *p : 0.0;
  };

  for (int j = n - 1; j >= 0; --j) {
    const int lo = col_ptr[j], hi = col_ptr[j + 1];
    for (int e = hi - 1; e >= lo; --e) {
      const int i = rows[e];
      double s = 0.0;
      for (int t = lo; t < hi; ++t) {
        const int k = rows[t];
        s += lval[t] * lookup(std::max(i, k), std::min(i, k));
      }
      pinv->val_[e] = -s;
    }
    double s = 0.0;
    for (int t = lo; t < hi; ++t) s += lval[t] * pinv->val_[t];
    pinv->diag_[j] = 1.0 / d[j] - s;
  }

  impl_->pinv = std::move(pinv);
  return *impl_->pinv;
}

const PartialInverse& marginal_moments(const Factor& f) { return f.partial_inverse(); }

// ---------------------------------------------------------------------------

ConstraintKriging::ConstraintKriging(const Factor& f, SpMat c) : c_(std::move(c)) {
  if (c_.cols() != f.n()) {
    throw_validation(errc::dimension_mismatch, "constraint matrix column count mismatch");
  }
  if (c_.rows() == 0) throw_validation(errc::bad_param, "empty constraint set");
  c_.makeCompressed();
  Eigen::MatrixXd ct = Eigen::MatrixXd(c_.transpose());
  v_ = f.solve(ct);
  Eigen::MatrixXd s = c_ * v_;
  s_ldlt_.compute(0.5 * (s + s.transpose()));
  const auto& d = s_ldlt_.vectorD();
  double ld = 0.0;
  for (int i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) {
      throw_validation(errc::rank_deficient, "linearly dependent constraints");
    }
    ld += std::log(d[i]);
  }
  log_det_s_ = ld;
}

Eigen::VectorXd ConstraintKriging::apply_mean(const Eigen::VectorXd& mu) const {
  return mu - v_ * s_ldlt_.solve(c_ * mu);
}

Eigen::VectorXd ConstraintKriging::apply_sample(const Eigen::VectorXd& x) const {
  return x - v_ * s_ldlt_.solve(c_ * x);
}

Eigen::VectorXd ConstraintKriging::premultiply_v(const Eigen::VectorXd& a) const {
  return v_.transpose() * a;
}

Eigen::VectorXd ConstraintKriging::s_solve(const Eigen::VectorXd& rhs) const {
  return s_ldlt_.solve(rhs);
}

double ConstraintKriging::cov_correction(const Eigen::VectorXd& va, const Eigen::VectorXd& vb) const {
  return va.dot(s_ldlt_.solve(vb));
}

// ---------------------------------------------------------------------------

PredictorMoments::PredictorMoments(const Factor& f, SpMat a, const ConstraintKriging* kriging)
    : f_(f), a_(std::move(a)), kriging_(kriging) {
  if (a_.cols() != f.n()) {
    throw_validation(errc::dimension_mismatch, "design columns do not match latent dimension");
  }
  a_.makeCompressed();
  rows_ = a_;  // row-major copy for O(row nnz) extraction
  const int m = static_cast<int>(a_.rows());
  var_.resize(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd ai = a_row(i);
    const Eigen::VectorXd col = f_.solve(ai);
    double v = ai.dot(col);
    if (kriging_) {
      const Eigen::VectorXd va = kriging_->premultiply_v(ai);
      v -= kriging_->cov_correction(va, va);
    }
    var_[i] = std::max(v, 0.0);
  }
}

Eigen::VectorXd PredictorMoments::a_row(int i) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a_.cols());
  for (RowMat::InnerIterator it(rows_, i); it; ++it) out[it.col()] = it.value();
  return out;
}

Eigen::VectorXd PredictorMoments::covariance_row(int i) const {
  const Eigen::VectorXd ai = a_row(i);
  const Eigen::VectorXd col = f_.solve(ai);
  Eigen::VectorXd row = a_ * col;
  if (kriging_) {
    const Eigen::VectorXd va = kriging_->premultiply_v(ai);
    row -= a_ * (kriging_->v() * kriging_->s_solve(va));
  }
  return row;
}

Eigen::VectorXd PredictorMoments::correlation_row(int i) const {
  if (i < 0 || i >= count()) throw_validation(errc::index_out_of_range, "row index out of range");
  Eigen::VectorXd cov = covariance_row(i);
  const double sdi = std::sqrt(var_[i]);
  Eigen::VectorXd out(cov.size());
  for (int j = 0; j < cov.size(); ++j) {
    const double denom = sdi * std::sqrt(var_[j]);
    double c = denom > 0.0 ? cov[j] / denom : 0.0;
    c = std::clamp(c, -1.0, 1.0);
    out[j] = c;
  }
  out[i] = 1.0;
  return out;
}

Eigen::VectorXd correlation_row(const Factor& f, const SpMat& a, int i,
                                const ConstraintKriging* kriging) {
  PredictorMoments pm(f, a, kriging);
  return pm.correlation_row(i);
}

}  // namespace lgocv
