#ifndef KAE_TRAINER_HPP
#define KAE_TRAINER_HPP

#include <cstdint>
#include <vector>

#include "kae/gradients.hpp"
#include "kae/kernels.hpp"
#include "kae/layers.hpp"
#include "kae/types.hpp"

namespace kae {

enum class StepRule { constant, inverse_t };

struct TrainConfig {
  int epochs = 0;
  double step = 0.1;
  StepRule decay = StepRule::constant;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  double jitter = 0.0;  // <= 0 means automatic (1e-10 * trace(W)/n) on a failed factorization
};

/// One objective evaluation along the optimization path.  Record 0 is the
/// post-initialization objective; record t follows epoch t's update.
struct TraceRecord {
  int epoch = 0;
  double total = 0.0;
  double distortion = 0.0;
  std::vector<double> norms;
};

/// Seeded i.i.d. normal(0, init_scale^2 / n) coefficients, one matrix per
/// layer dimension, filled layer-major then row-major.
std::vector<Matrix> init_coefficients(const TrainConfig& cfg, Index n,
                                      const std::vector<Index>& dims);

struct FiniteFit {
  ModelState state;
  std::vector<TraceRecord> trace;
};

/// Plain gradient descent on all coefficient matrices.  Per epoch: compute
/// every layer's gradient at the epoch-start state, then update all layers
/// simultaneously, refresh the caches, and record the objective.
FiniteFit fit_finite(const Matrix& inputs, std::vector<LayerSpec> layers, const TrainConfig& cfg);

/// Same descent from explicit starting coefficients (warm start) instead of
/// the seeded random draw; one n-by-dim matrix per layer.
FiniteFit fit_finite(const Matrix& inputs, std::vector<LayerSpec> layers, const TrainConfig& cfg,
                     std::vector<Matrix> initial_coeffs);

struct KrrFactor {
  Matrix n_last;     // W^{-1} K_in W^{-1}
  Matrix w_inv;      // (K_L + n lambda I)^{-1}
  Matrix gram_last;  // K_L over the given representations
};

/// Solves the last-layer ridge system in its kernel-trick form.  W is
/// factored by Cholesky; on numerical failure the diagonal is jittered once
/// (config value, or 1e-10 * trace(W)/n when jitter <= 0) before giving up.
KrrFactor n_krr(const Matrix& reps_last, const ScalarKernel& last_kernel, double lambda_last,
                const GramTable& k_in, double jitter);

/// A kernelized autoencoder: explicit inner layers (with an induced first
/// layer) plus an implicit last layer represented only through n_last/w_inv.
struct K2aeState {
  ModelState inner;  // layers 1..L-1
  ScalarKernel last_kernel;
  double lambda_last = 0.0;
  GramTable k_in;    // full training Gram (fit-time; empty after model load)
  Vector k_in_diag;  // always available (needed to evaluate layer 1 on new points)
  Matrix gram_last;  // K_L over inner.reps[depth]
  Matrix n_last;
  Matrix w_inv;
  bool synced = false;  // n_last/w_inv/gram_last agree with the inner coefficients

  void touch() {
    inner.touch();
    synced = false;
  }
};

/// total = n lambda_L^2 tr(N_L) + sum_{l<L} lambda_l ||f_l||^2 + lambda_L tr(K_L N_L);
/// the distortion component is n lambda_L^2 tr(N_L).
Objective k2ae_objective(const K2aeState& state);

/// Gradient of the implicit-space distortion with respect to every inner
/// layer's coefficients, with the last-layer coefficients held fixed:
/// row i0 of result[l0-1] = -4 lambda_L sum_i (N_L.row(i) * D_L(x_i)) jac(L-1, l0, i, i0).
std::vector<Matrix> grad_distortion_k2ae(const K2aeState& state, const JacobianTable& jt);

struct K2aeFit {
  K2aeState state;
  std::vector<TraceRecord> trace;
};

/// Alternating scheme: initialize coefficients, solve the last layer (n_krr),
/// then per epoch take one gradient step on all inner layers (last layer
/// fixed) and re-solve the last layer.
K2aeFit fit_k2ae(const GramTable& k_in, std::vector<LayerSpec> inner_layers,
                 ScalarKernel last_kernel, double lambda_last, const TrainConfig& cfg);

/// Same scheme from explicit starting coefficients (warm start, e.g. a
/// spectral solution) instead of the seeded random draw.
K2aeFit fit_k2ae(const GramTable& k_in, std::vector<LayerSpec> inner_layers,
                 ScalarKernel last_kernel, double lambda_last, const TrainConfig& cfg,
                 std::vector<Matrix> initial_coeffs);

/// Implicit-space squared reconstruction error for m test points given their
/// kernel rows against the training set and their self inner products.
Vector test_distortion(const K2aeState& state, const Matrix& k_test_train,
                       const Vector& k_test_diag);

/// Layer with the smallest dimension (first on ties), 1-based.
int default_code_layer(const std::vector<LayerSpec>& layers);

/// Forward `inputs` through layers 1..layer of a finite model (layer = 0
/// picks default_code_layer).  layer = depth reconstructs.
Matrix encode(const ModelState& state, const Matrix& inputs, int layer = 0);

/// Same for a kernelized model: test points enter through the induced first
/// layer, described by their Gram rows against the training set.
Matrix encode(const K2aeState& state, const Matrix& k_test_train, const Vector& k_test_diag,
              int layer = 0);

}  // namespace kae

#endif  // KAE_TRAINER_HPP
