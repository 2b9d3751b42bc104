#ifndef KAE_GRADIENTS_HPP
#define KAE_GRADIENTS_HPP

#include <cstddef>
#include <vector>

#include "kae/layers.hpp"
#include "kae/types.hpp"

namespace kae {

/// All Jacobians jac(l, l0, i, i0) = d x_i^(l) / d phi_{l0, i0}, a d_l x d_l0
/// matrix, for every sample pair and every level l in [l0, depth].
///
/// Level l0 is the base case [K_l0]_{i,i0} * diag(a_l0); higher levels follow
/// the chain rule through the kernel evaluations of the layers in between:
///   jac_i^(l) = diag(a_l) * ( Phi_l^T D_l(x_i) jac_i^(l-1)
///               + sum_i' phi_{l,i'} (D_l(x_i') row i) jac_i'^(l-1) )
/// with D_l(x) the pairwise first-argument kernel gradients at level l-1.
class JacobianTable {
 public:
  JacobianTable() = default;

  int depth() const { return depth_; }
  Index n() const { return n_; }

  /// Entry for level l, coefficient layer l0 (1-based), samples i, i0.
  const Matrix& at(int l, int l0, Index i, Index i0) const;

  /// Number of table entries constructed; the build touches exactly
  /// n^2 * depth*(depth+1)/2 small-matrix entries.
  std::size_t entries_built() const { return built_; }

 private:
  friend JacobianTable jacobians(const ModelState& state);

  // by_l0_[l0-1][l-l0] holds the n*n entries of level l, index i*n + i0.
  std::vector<std::vector<std::vector<Matrix>>> by_l0_;
  std::size_t built_ = 0;
  int depth_ = 0;
  Index n_ = 0;
};

/// Builds the complete table for a fresh state.
JacobianTable jacobians(const ModelState& state);

/// Pairwise first-argument kernel gradients of `kernel` over `points`:
/// result[i] is the n x d matrix whose row i' is grad1(x_i, x_{i'}).
std::vector<Matrix> kernel_pair_deltas(const ScalarKernel& kernel, const Matrix& points);

/// kernel_pair_deltas of layer l's kernel over its inputs X^(l-1).
std::vector<Matrix> layer_deltas(const ModelState& state, int l);

/// Shared contraction behind the cross-layer gradient terms:
///   row i0 of the result = sum_i (weights.row(i) * deltas[i]) * jt(level, l0, i, i0)
/// where `deltas` are pairwise kernel gradients over the level-`level`
/// representations and `weights` couples sample pairs (an n x n matrix).
Matrix cross_accum(const JacobianTable& jt, const std::vector<Matrix>& deltas,
                   const Matrix& weights, int level, int l0);

/// Gradient of the distortion (1/n) sum_i ||x_i - x_i^(L)||^2 with respect to
/// each layer's coefficients; result[l0-1] is n x d_l0.
std::vector<Matrix> grad_distortion(const ModelState& state, const JacobianTable& jt);

/// Gradient of ||f_l||^2 with respect to layer l's own coefficients:
/// 2 K_l Phi_l A_l.
Matrix grad_norm_own(const ModelState& state, int l);

/// Gradient of ||f_l||^2 with respect to an earlier layer l0 < l, flowing
/// through the kernel evaluations of layer l.
Matrix grad_norm_cross(const ModelState& state, const JacobianTable& jt, int l, int l0);

/// Full objective gradient (distortion + sum_l lambda_l ||f_l||^2) per layer.
std::vector<Matrix> full_gradient(const ModelState& state, const JacobianTable& jt);

/// Central-difference gradient of objective_finite, rebuilding every cache
/// per probe.  Deliberately single-threaded and straightforward: this is the
/// oracle the analytic path is tested against.
std::vector<Matrix> fd_gradient(ModelState state, const Matrix& inputs, double step);

}  // namespace kae

#endif  // KAE_GRADIENTS_HPP
