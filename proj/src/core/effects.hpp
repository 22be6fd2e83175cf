#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/linalg.hpp"

namespace lgocv {

// --- structure builders -----------------------------------------------------

// Stationary AR1 precision with marginal precision tau: the diagonal is
// tau/(1-rho^2) * [1, 1+rho^2, ..., 1+rho^2, 1], off-diagonal -tau*rho/(1-rho^2).
SymSparse ar1_precision(int n, double rho, double tau);

// First-order random-walk structure D'D (rank n-1, null space = constants).
SymSparse rw1_structure(int n);

// Intrinsic CAR structure Diag(degree) - Adjacency (rank n - #components).
SymSparse icar_structure(const Graph& g);

// Geometric mean of the marginal variances of the constrained generalized
// inverse; expected_deficiency must match the numerical null dimension.
double structure_scale_factor(const SymSparse& r, int expected_deficiency);
// r multiplied by that factor, so the scaled structure has unit geometric
// mean marginal variance.
SymSparse scale_structure(const SymSparse& r, int expected_deficiency);

// Joint precision of (composite, structured) for the reparameterized
// convolution model: composite = sqrt((1-phi)/tau) v + sqrt(phi/tau) u with
// u ~ scaled structure under a sum-to-zero constraint. phi in [0,1), tau > 0.
SymSparse bym2_joint(const SymSparse& scaled_structure, double tau, double phi);

enum class InteractionType { type_i, type_ii, type_iii, type_iv };
InteractionType interaction_type_from_string(const std::string& s);
std::string to_string(InteractionType t);

SymSparse kronecker(const SymSparse& a, const SymSparse& b);

// Space-time interaction structure over index (t,s) with s running fastest:
//   I:   I_T (x) I_S      II:  R_time (x) I_S
//   III: I_T (x) R_space  IV:  R_time (x) R_space
SymSparse interaction_structure(InteractionType t, const SymSparse& r_time,
                                const SymSparse& r_space);

// Marginal B-spline basis on equally spaced knots spanning [lo, hi]
// (knots extend degree segments past each end, so rows sum to one on the
// closed range). k is the basis dimension; requires k > degree.
Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, int k, int degree, double lo, double hi);

// Difference penalty D'D of the given order (null space = polynomials of
// degree order-1).
SymSparse difference_penalty(int k, int order);

// Row-wise Kronecker of marginal bases; column index = lat * k_lon + lon
// (longitude fastest).
SpMat pspline2d_basis(const Eigen::VectorXd& lon, const Eigen::VectorXd& lat, int k_lon,
                      int k_lat, int degree);

// --- effect blocks ----------------------------------------------------------

enum class HyperTransform { log_precision, logit_unit, fisher_z };

struct HyperSlot {
  std::string name;  // local name; the model qualifies it as "<effect>.<name>"
  HyperTransform transform;
  double default_value;  // natural scale
};

// One additive component of the latent field: its precision as a function of
// its hyperparameters, the matching normalizing log-determinant, and the
// identifiability constraints implied by the structure's null space.
class EffectBlock {
 public:
  virtual ~EffectBlock() = default;

  const std::string& name() const { return name_; }
  virtual int dim() const = 0;
  virtual std::span<const HyperSlot> hypers() const = 0;

  // Precision at natural-scale hyper values (ordered as hypers()).
  virtual SymSparse precision(std::span<const double> h) const = 0;

  // log of the normalizing determinant G in the block prior
  //   (2*pi)^{-(dim-k)/2} G^{1/2} exp(-f' P f / 2)
  // restricted to the constraint surface; equals log det P for proper blocks.
  virtual double log_gdet(std::span<const double> h) const = 0;

  virtual int rank_deficiency() const { return 0; }
  // Orthonormal constraint rows (rank_deficiency x dim).
  virtual const Eigen::MatrixXd& null_basis() const;

  // Design entries of observation i within this block.
  virtual std::vector<std::pair<int, double>> design_entries(int obs) const = 0;
  virtual int observation_count() const = 0;

  // Eigenvalues of the generalized inverse of the structured part, used by
  // the distance-based mixing prior; empty for blocks without one.
  virtual const std::vector<double>& mixing_eigenvalues() const;

  // Per-component labels for reporting; empty when components are anonymous.
  virtual const std::vector<std::string>& component_names() const;

 protected:
  explicit EffectBlock(std::string name) : name_(std::move(name)) {}

 private:
  std::string name_;
};

using BlockPtr = std::unique_ptr<EffectBlock>;

BlockPtr make_iid_block(std::string name, std::vector<int> index, int dim);
BlockPtr make_ar1_block(std::string name, std::vector<int> index, int dim);
BlockPtr make_rw1_block(std::string name, std::vector<int> index, int dim, bool scale = true);
BlockPtr make_icar_block(std::string name, std::vector<int> index, const Graph& g,
                         bool scale = true);
BlockPtr make_bym2_block(std::string name, std::vector<int> index, const Graph& g);
BlockPtr make_pspline2d_block(std::string name, const Eigen::VectorXd& lon,
                              const Eigen::VectorXd& lat, int k_lon, int k_lat, int degree,
                              int penalty_order);
// time_dim with a random-walk time structure; space from the graph. Both
// component structures are scaled before the product.
BlockPtr make_interaction_block(std::string name, std::vector<int> time_index,
                                std::vector<int> space_index, int time_dim, const Graph& g,
                                InteractionType type);
// Fixed-slope coefficients (intercept and covariates) with a small fixed
// precision; columns are the per-observation regressor values.
BlockPtr make_coef_block(std::string name, std::vector<Eigen::VectorXd> columns,
                         std::vector<std::string> column_names, double precision = 1e-3);

}  // namespace lgocv
