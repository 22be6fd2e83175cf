#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <memory>
#include <span>
#include <vector>

namespace lgocv {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Symmetric sparse matrix stored as its lower triangle. Duplicate triplets
// are summed; entries that cancel to zero are pruned so patterns stay tight.
class SymSparse {
 public:
  SymSparse() = default;

  static SymSparse from_triplets(int n, std::span<const Triplet> entries);
  static SymSparse from_lower(SpMat lower);
  static SymSparse from_dense(const Eigen::MatrixXd& m);
  static SymSparse identity(int n, double scale = 1.0);

  int n() const { return static_cast<int>(lower_.rows()); }
  const SpMat& lower() const { return lower_; }
  SpMat full() const;
  Eigen::MatrixXd dense() const;
  double max_abs_diag() const;

  SymSparse scaled(double s) const;
  SymSparse shifted_diag(double s) const;  // this + s*I

  friend SymSparse operator+(const SymSparse& a, const SymSparse& b);

 private:
  SpMat lower_;  // compressed, lower triangle including diagonal
};

struct FactorOptions {
  // Relative jitter ladder: each rung scales the max diagonal magnitude.
  std::array<double, 3> jitter_ladder{1e-10, 1e-8, 1e-6};
  // Pivots below pivot_rel_tol * max|diag| count as numerically zero.
  double pivot_rel_tol = 1e-12;
};

enum class RankFlag { full, deficient };

// Selected inverse of a factored matrix, exact on the union of the factor's
// sparsity pattern and the diagonal (Takahashi recurrences). Indices are in
// the original (unpermuted) ordering.
class PartialInverse {
 public:
  double variance(int i) const;
  // Covariance for a pair inside the pattern; throws index_out_of_range for
  // pairs the selected inverse does not cover.
  double covariance(int i, int j) const;
  bool covers(int i, int j) const;

 private:
  friend class Factor;
  int n_ = 0;
  std::vector<int> perm_;      // original -> permuted
  std::vector<int> col_ptr_;   // CSC over strictly-lower pattern (permuted)
  std::vector<int> row_idx_;
  std::vector<double> val_;    // S entries on that pattern
  std::vector<double> diag_;   // S_jj (permuted)
  const double* find(int pi, int pj) const;  // pi > pj, permuted indices
};

// Sparse LDLT factorization (AMD ordering) of a symmetric positive
// semidefinite matrix. Singular matrices factor through a diagonal jitter
// ladder and are flagged rank-deficient; indefinite matrices are rejected.
class Factor {
 public:
  static Factor compute(const SymSparse& m, const FactorOptions& opts = {});

  int n() const;
  // log-determinant of the matrix actually factored (jitter included when a
  // rung was needed; callers needing generalized log-determinants of
  // intrinsic matrices use spectral formulas instead).
  double log_det() const;
  RankFlag rank_flag() const;
  int deficiency() const;  // small-pivot count, -1 when not estimable
  double jitter() const;   // absolute diagonal shift applied, 0 when clean

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

  // x = P' L^{-T} D^{-1/2} z, so Cov(x) = M^{-1} for z ~ N(0, I).
  Eigen::VectorXd sample_with_covariance(const Eigen::VectorXd& z) const;

  const PartialInverse& partial_inverse() const;  // computed once, cached

  Factor(Factor&&) noexcept;
  Factor& operator=(Factor&&) noexcept;
  ~Factor();

 private:
  Factor();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Marginal variances of all coordinates under precision M (factored), plus
// pattern-covered covariances, in original indices.
const PartialInverse& marginal_moments(const Factor& f);

// Conditioning-by-kriging data for linear constraints C f = 0 against a
// factored precision M: V = M^{-1} C', S = C V.
class ConstraintKriging {
 public:
  ConstraintKriging(const Factor& f, SpMat c);

  int count() const { return static_cast<int>(c_.rows()); }
  const SpMat& constraint_matrix() const { return c_; }
  const Eigen::MatrixXd& v() const { return v_; }
  double log_det_s() const { return log_det_s_; }

  // mu - V S^{-1} (C mu): mean of f | Cf = 0.
  Eigen::VectorXd apply_mean(const Eigen::VectorXd& mu) const;
  // x - V S^{-1} (C x) applied to a sample fluctuation.
  Eigen::VectorXd apply_sample(const Eigen::VectorXd& x) const;
  Eigen::VectorXd premultiply_v(const Eigen::VectorXd& a) const;  // V' a
  Eigen::VectorXd s_solve(const Eigen::VectorXd& rhs) const;      // S^{-1} rhs
  // (V'a)' S^{-1} (V'b): covariance reduction for Cov(a'f, b'f).
  double cov_correction(const Eigen::VectorXd& va, const Eigen::VectorXd& vb) const;

 private:
  SpMat c_;
  Eigen::MatrixXd v_;
  Eigen::LDLT<Eigen::MatrixXd> s_ldlt_;
  double log_det_s_ = 0.0;
};

// Moments of the linear predictor eta = A f where f ~ N(mode, M^{-1}),
// optionally conditioned on constraints. Rows come from one sparse solve
// each, so full correlation rows are exact.
class PredictorMoments {
 public:
  PredictorMoments(const Factor& f, SpMat a, const ConstraintKriging* kriging = nullptr);

  int count() const { return static_cast<int>(a_.rows()); }
  Eigen::VectorXd covariance_row(int i) const;
  Eigen::VectorXd correlation_row(int i) const;
  double variance(int i) const { return var_[i]; }
  const Eigen::VectorXd& variances() const { return var_; }

 private:
  using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  const Factor& f_;
  SpMat a_;
  RowMat rows_;
  const ConstraintKriging* kriging_;
  Eigen::VectorXd var_;
  Eigen::VectorXd a_row(int i) const;
};

// Correlations of predictor coordinate i with every coordinate, |values| <= 1
// and exactly 1 at i.
Eigen::VectorXd correlation_row(const Factor& f, const SpMat& a, int i,
                                const ConstraintKriging* kriging = nullptr);

}  // namespace lgocv
