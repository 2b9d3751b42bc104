#ifndef KAE_KPCA_HPP
#define KAE_KPCA_HPP

#include "kae/kernels.hpp"
#include "kae/types.hpp"

namespace kae {

/// Eigendecomposition of a Gram matrix with a fixed presentation: eigenvalues
/// non-increasing and clamped at 0, eigenvector columns orthonormal, and each
/// column's largest-magnitude entry made non-negative (first such entry on
/// ties), so the output is deterministic for non-degenerate spectra.
struct SpectralDecomposition {
  Vector eigvals;
  Matrix eigvecs;
};

SpectralDecomposition spectral(const GramTable& k);

/// Kernel PCA embedding: columns sqrt(eigval_i) * u_i for the p largest
/// components of K (optionally double-centered first: K <- H K H).
/// Components with eigval <= 1e-12 * eigval_max are inadmissible.
Matrix kpca(const GramTable& k, int p, bool center);

struct LinearClosedForm {
  Matrix codes;       // columns eigval_i^{1/4} * u_i
  double distortion;  // sum of the trailing eigenvalues (rank-p truncation error)
  Vector eigvals;
};

/// Closed-form optimum of the unregularized two-layer linear kernelized
/// autoencoder on K: codes are the KPCA components rescaled by the inverse
/// square-rooted singular values, and the distortion is the Eckart-Young
/// truncation error sum_{i>p} eigval_i.
LinearClosedForm k2ae_linear_closed_form(const GramTable& k, int p);

}  // namespace kae

#endif  // KAE_KPCA_HPP
