#ifndef KAE_LAYERS_HPP
#define KAE_LAYERS_HPP

#include <vector>

#include "kae/kernels.hpp"
#include "kae/types.hpp"

// Layer indices count from 1 (layer l maps X^(l-1) to X^(l)); sample indices
// count from 0.  "Layer 0" is the input itself.

namespace kae {

/// One layer f_l of the autoencoder: a scalar kernel k_l, the diagonal of the
/// PSD output operator A_l, the output dimension d_l, and the ridge weight
/// lambda_l.  Layer l maps m points of dimension d_{l-1} to m points of
/// dimension d_l through f_l(x) = sum_i k_l(x, x_i^{(l-1)}) * A_l * phi_{l,i}.
struct LayerSpec {
  ScalarKernel kernel;
  Index dim = 0;
  Vector a_diag;  // strictly positive entries, length dim
  double lambda = 0.0;

  /// Layer with A_l = identity.
  static LayerSpec make(ScalarKernel kernel, Index dim, double lambda);

  void validate() const;
};

/// Coefficients and cached per-layer quantities of a (partially) trained
/// model.  `reps` and `grams` are filled by forward_all / forward_all_induced
/// and must be refreshed (after calling touch()) whenever `coeffs` changes;
/// operations that consume the caches throw std::logic_error when `fresh` is
/// unset.
struct ModelState {
  std::vector<LayerSpec> layers;  // layers[l-1] describes f_l
  std::vector<Matrix> coeffs;     // coeffs[l-1] = Phi_l, n x d_l
  bool induced_input = false;     // layer 1 evaluates against an input Gram matrix

  std::vector<Matrix> reps;   // reps[l] = X^(l); reps[0] = inputs (empty when induced)
  std::vector<Matrix> grams;  // grams[l-1] = K_l
  bool fresh = false;

  Index n() const { return coeffs.empty() ? 0 : coeffs.front().rows(); }
  int depth() const { return static_cast<int>(layers.size()); }

  /// Marks the caches stale; call after mutating coeffs.
  void touch() { fresh = false; }

  /// Shape and parameter checks (layers non-empty, coefficient shapes chain).
  void validate() const;
};

/// Objective value split into its components.  norms[l-1] = ||f_l||^2; for a
/// kernelized model the implicit last layer's norm is appended at the end.
struct Objective {
  double total = 0.0;
  double distortion = 0.0;
  std::vector<double> norms;
};

/// Applies one layer to `inputs` given the support points the coefficients
/// expand over: gram(kernel, inputs, support) * coeffs * diag(a).
Matrix forward_layer(const LayerSpec& layer, const Matrix& coeffs, const Matrix& inputs,
                     const Matrix& support);

/// Recomputes all reps and Gram caches from explicit inputs (X^(0) = inputs).
void forward_all(ModelState& state, const Matrix& inputs);

/// Same, but layer 1 evaluates its kernel through gram_induced against k_in;
/// there is no explicit X^(0).
void forward_all_induced(ModelState& state, const GramTable& k_in);

/// ||f_l||^2 = trace(K_l Phi_l A_l Phi_l^T), l in [1, depth()].
double layer_norm_sq(const ModelState& state, int l);

/// (1/n) sum_i ||x_i - x_i^(L)||^2 + sum_l lambda_l ||f_l||^2 for a model
/// whose last layer reconstructs the inputs (d_L = d_0).
Objective objective_finite(const ModelState& state, const Matrix& inputs);

}  // namespace kae

#endif  // KAE_LAYERS_HPP
