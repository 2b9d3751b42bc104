#ifndef KAE_KERNELS_HPP
#define KAE_KERNELS_HPP

#include <span>

#include "kae/types.hpp"

namespace kae {

enum class KernelKind { gaussian, polynomial, linear };

/// Parameterized scalar kernel.
///
///   gaussian:    k(x,x') = exp(-gamma * ||x - x'||^2),  gamma > 0
///   polynomial:  k(x,x') = (a * <x,x'> + b)^c,          integer c >= 1, a != 0
///   linear:      polynomial with a = 1, b = 0, c = 1
struct ScalarKernel {
  KernelKind kind = KernelKind::gaussian;
  double gamma = 1.0;  // gaussian bandwidth; unused otherwise
  double a = 1.0;      // polynomial scale; unused for gaussian
  double b = 0.0;      // polynomial offset; unused for gaussian
  int c = 1;           // polynomial degree; unused for gaussian

  static ScalarKernel gaussian(double gamma);
  static ScalarKernel polynomial(double a, double b, int c);
  static ScalarKernel linear();

  /// Throws std::invalid_argument when the parameters are out of range.
  void validate() const;
};

/// Symmetric PSD Gram matrix (pairwise inner products of some input space).
/// Construction symmetrizes the entries and, unless disabled, validates:
/// square shape, symmetry within 1e-12 (scaled), non-negative diagonal, and
/// smallest eigenvalue >= -1e-8 * spectral scale.
class GramTable {
 public:
  GramTable() = default;
  explicit GramTable(Matrix entries, bool validate = true);

  const Matrix& matrix() const { return k_; }
  Index size() const { return k_.rows(); }
  Vector diagonal() const { return k_.diagonal(); }

 private:
  Matrix k_;
};

/// k(x, x').  Spans must have equal length.
double kernel_eval(const ScalarKernel& k, std::span<const double> x, std::span<const double> y);

/// Gradient of k in its first argument, written to out (same length as x).
///   gaussian:    -2*gamma * k(x,x') * (x - x')
///   polynomial:  c*a * (a*<x,x'> + b)^(c-1) * x'
void kernel_grad1(const ScalarKernel& k, std::span<const double> x, std::span<const double> y,
                  std::span<double> out);

/// Pairwise kernel matrix: entry (i, j) = k(row_i(rows), row_j(cols)).
Matrix gram(const ScalarKernel& k, const Matrix& rows, const Matrix& cols);

/// n x d matrix whose row i' is the first-argument kernel gradient
/// grad1(x_i, x_{i'}) over the points of X (0-based sample index i).
Matrix delta_matrix(const ScalarKernel& k, const Matrix& points, Index i);

/// Evaluates k between two points of an implicit feature space described only
/// by inner products: k_xx = <u,u>, k_xy = <u,v>, k_yy = <v,v>.  The gaussian
/// branch clamps the induced squared distance at 0 so round-off can never
/// produce a value above 1.
double gram_induced_eval(const ScalarKernel& k, double k_xx, double k_xy, double k_yy);

/// Training-side induced Gram: entry (i,j) = gram_induced_eval on k_in's
/// entries (i,i), (i,j), (j,j).
Matrix gram_induced(const ScalarKernel& k, const Matrix& k_in);

/// Cross-block induced Gram between m query points and n support points:
/// entry (t,j) = gram_induced_eval(q_diag[t], k_qs(t,j), s_diag[j]).
Matrix gram_induced_cross(const ScalarKernel& k, const Matrix& k_qs, const Vector& q_diag,
                          const Vector& s_diag);

}  // namespace kae

#endif  // KAE_KERNELS_HPP
