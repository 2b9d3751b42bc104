#include "kae/trainer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Cholesky>

#include "kae/rng.hpp"

namespace kae {

namespace {

constexpr double kDivergenceCap = 1e12;

double step_at(const TrainConfig& cfg, int epoch) {
  switch (cfg.decay) {
    case StepRule::constant:
      return cfg.step;
    case StepRule::inverse_t:
      return cfg.step / (1.0 + static_cast<double>(epoch) / static_cast<double>(cfg.epochs));
  }
  throw std::invalid_argument("unknown step rule");
}

void check_divergence(const Objective& obj, int epoch) {
  if (!std::isfinite(obj.total) || obj.total > kDivergenceCap) {
    throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                             " (objective " + std::to_string(obj.total) + ")");
  }
}

TraceRecord record_of(const Objective& obj, int epoch) {
  TraceRecord rec;
  rec.epoch = epoch;
  rec.total = obj.total;
  rec.distortion = obj.distortion;
  rec.norms = obj.norms;
  return rec;
}

void require_synced(const K2aeState& state, const char* op) {
  if (!state.inner.fresh || !state.synced) {
    throw std::logic_error(std::string(op) +
                           ": state is stale; refresh the forward pass and n_krr first");
  }
}

/// Inner-layer gradient of the full kernelized objective with the last layer
/// fixed.  The distortion contributes -4 lambda_L * S and the last-layer norm
/// +2 lambda_L * S for the same contraction S, so the two are combined here.
std::vector<Matrix> k2ae_inner_gradients(const K2aeState& state, const JacobianTable& jt) {
  const ModelState& inner = state.inner;
  const int depth = inner.depth();
  const std::vector<Matrix> last_deltas =
      kernel_pair_deltas(state.last_kernel, inner.reps[static_cast<std::size_t>(depth)]);

  std::vector<Matrix> grads(static_cast<std::size_t>(depth));
  for (int l0 = 1; l0 <= depth; ++l0) {
    grads[static_cast<std::size_t>(l0 - 1)] =
        -2.0 * state.lambda_last *
        cross_accum(jt, last_deltas, state.n_last, depth, l0);
    const double lam = inner.layers[static_cast<std::size_t>(l0 - 1)].lambda;
    if (lam != 0.0) {
      grads[static_cast<std::size_t>(l0 - 1)] += lam * grad_norm_own(inner, l0);
    }
  }
  for (int l = 2; l <= depth; ++l) {
    const double lam = inner.layers[static_cast<std::size_t>(l - 1)].lambda;
    if (lam == 0.0) continue;
    for (int l0 = 1; l0 < l; ++l0) {
      grads[static_cast<std::size_t>(l0 - 1)] += lam * grad_norm_cross(inner, jt, l, l0);
    }
  }
  return grads;
}

void refresh_k2ae(K2aeState& state, double jitter) {
  forward_all_induced(state.inner, state.k_in);
  KrrFactor kr = n_krr(state.inner.reps[static_cast<std::size_t>(state.inner.depth())],
                       state.last_kernel, state.lambda_last, state.k_in, jitter);
  state.n_last = std::move(kr.n_last);
  state.w_inv = std::move(kr.w_inv);
  state.gram_last = std::move(kr.gram_last);
  state.synced = true;
}

}  // namespace

std::vector<Matrix> init_coefficients(const TrainConfig& cfg, Index n,
                                      const std::vector<Index>& dims) {
  if (n < 1) throw std::invalid_argument("init_coefficients: need at least one sample");
  if (cfg.init_scale < 0.0) throw std::invalid_argument("init_coefficients: negative init_scale");
  Rng rng(cfg.seed);
  const double sigma = cfg.init_scale / std::sqrt(static_cast<double>(n));
  std::vector<Matrix> coeffs;
  coeffs.reserve(dims.size());
  for (const Index d : dims) {
    if (d < 1) throw std::invalid_argument("init_coefficients: layer dimension must be >= 1");
    Matrix phi(n, d);
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < d; ++k) phi(i, k) = sigma * rng.normal();
    }
    coeffs.push_back(std::move(phi));
  }
  return coeffs;
}

namespace {

void check_initial_coeffs(const char* where, const std::vector<LayerSpec>& layers,
                          const std::vector<Matrix>& coeffs, Index n) {
  if (coeffs.size() != layers.size()) {
    throw std::invalid_argument(std::string(where) + ": got " + std::to_string(coeffs.size()) +
                                " starting coefficient matrices for " +
                                std::to_string(layers.size()) + " layers");
  }
  for (std::size_t l = 0; l < coeffs.size(); ++l) {
    if (coeffs[l].rows() != n || coeffs[l].cols() != layers[l].dim) {
      throw std::invalid_argument(std::string(where) + ": starting coefficients for layer " +
                                  std::to_string(l + 1) + " are " +
                                  std::to_string(coeffs[l].rows()) + "x" +
                                  std::to_string(coeffs[l].cols()) + ", expected " +
                                  std::to_string(n) + "x" + std::to_string(layers[l].dim));
    }
    if (!coeffs[l].allFinite()) {
      throw std::invalid_argument(std::string(where) + ": starting coefficients for layer " +
                                  std::to_string(l + 1) + " contain non-finite values");
    }
  }
}

}  // namespace

FiniteFit fit_finite(const Matrix& inputs, std::vector<LayerSpec> layers, const TrainConfig& cfg) {
  std::vector<Index> dims;
  for (const LayerSpec& l : layers) dims.push_back(l.dim);
  return fit_finite(inputs, std::move(layers), cfg, init_coefficients(cfg, inputs.rows(), dims));
}

FiniteFit fit_finite(const Matrix& inputs, std::vector<LayerSpec> layers, const TrainConfig& cfg,
                     std::vector<Matrix> initial_coeffs) {
  if (layers.empty()) throw std::invalid_argument("fit_finite: need at least one layer");
  if (cfg.epochs < 0) throw std::invalid_argument("fit_finite: negative epoch count");
  if (!inputs.allFinite()) throw std::invalid_argument("fit_finite: inputs contain non-finite values");
  if (layers.back().dim != inputs.cols()) {
    throw std::invalid_argument("fit_finite: last layer dimension " +
                                std::to_string(layers.back().dim) +
                                " must equal the input dimension " + std::to_string(inputs.cols()));
  }
  check_initial_coeffs("fit_finite", layers, initial_coeffs, inputs.rows());

  FiniteFit fit;
  fit.state.layers = std::move(layers);
  fit.state.coeffs = std::move(initial_coeffs);
  forward_all(fit.state, inputs);
  fit.trace.push_back(record_of(objective_finite(fit.state, inputs), 0));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const JacobianTable jt = jacobians(fit.state);
    const std::vector<Matrix> grads = full_gradient(fit.state, jt);
    const double gamma = step_at(cfg, epoch);
    for (std::size_t l = 0; l < grads.size(); ++l) fit.state.coeffs[l] -= gamma * grads[l];
    fit.state.touch();
    forward_all(fit.state, inputs);
    const Objective obj = objective_finite(fit.state, inputs);
    check_divergence(obj, epoch);
    fit.trace.push_back(record_of(obj, epoch));
  }
  return fit;
}

KrrFactor n_krr(const Matrix& reps_last, const ScalarKernel& last_kernel, double lambda_last,
                const GramTable& k_in, double jitter) {
  const Index n = reps_last.rows();
  if (n < 1) throw std::invalid_argument("n_krr: need at least one sample");
  if (k_in.size() != n) throw std::invalid_argument("n_krr: Gram size does not match samples");
  if (lambda_last < 0.0) throw std::invalid_argument("n_krr: negative ridge weight");

  KrrFactor out;
  out.gram_last = gram(last_kernel, reps_last, reps_last);
  Matrix w = out.gram_last + static_cast<double>(n) * lambda_last *
                                 Matrix::Identity(n, n);
  // LDLT rather than LLT: same symmetric factorization family, but without
  // the square roots (exact on integer-valued scalar cases) and tolerant of
  // semidefinite W when lambda_last is tiny.
  Eigen::LDLT<Matrix> ldlt(w);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    const double bump = jitter > 0.0 ? jitter : 1e-10 * w.trace() / static_cast<double>(n);
    w += bump * Matrix::Identity(n, n);
    ldlt.compute(w);
    if (ldlt.info() != Eigen::Success) {
      throw std::runtime_error("n_krr: ridge system is singular even after jitter " +
                               std::to_string(bump));
    }
  }
  out.w_inv = ldlt.solve(Matrix::Identity(n, n));
  // Symmetrize: both the inverse and the sandwich are symmetric in exact
  // arithmetic, and downstream identities assume it.
  out.w_inv = 0.5 * (out.w_inv + out.w_inv.transpose()).eval();
  Matrix n_last = out.w_inv * k_in.matrix() * out.w_inv;
  out.n_last = 0.5 * (n_last + n_last.transpose()).eval();
  return out;
}

Objective k2ae_objective(const K2aeState& state) {
  require_synced(state, "k2ae_objective");
  const ModelState& inner = state.inner;
  const double n = static_cast<double>(inner.n());
  Objective obj;
  obj.distortion = n * state.lambda_last * state.lambda_last * state.n_last.trace();
  obj.total = obj.distortion;
  obj.norms.resize(static_cast<std::size_t>(inner.depth()) + 1);
  for (int l = 1; l <= inner.depth(); ++l) {
    obj.norms[static_cast<std::size_t>(l - 1)] = layer_norm_sq(inner, l);
    obj.total += inner.layers[static_cast<std::size_t>(l - 1)].lambda *
                 obj.norms[static_cast<std::size_t>(l - 1)];
  }
  const double last_norm = state.gram_last.cwiseProduct(state.n_last).sum();
  obj.norms.back() = last_norm;
  obj.total += state.lambda_last * last_norm;
  return obj;
}

std::vector<Matrix> grad_distortion_k2ae(const K2aeState& state, const JacobianTable& jt) {
  require_synced(state, "grad_distortion_k2ae");
  const ModelState& inner = state.inner;
  const int depth = inner.depth();
  const std::vector<Matrix> last_deltas =
      kernel_pair_deltas(state.last_kernel, inner.reps[static_cast<std::size_t>(depth)]);
  std::vector<Matrix> grads(static_cast<std::size_t>(depth));
  for (int l0 = 1; l0 <= depth; ++l0) {
    grads[static_cast<std::size_t>(l0 - 1)] =
        -4.0 * state.lambda_last *
        cross_accum(jt, last_deltas, state.n_last, depth, l0);
  }
  return grads;
}

K2aeFit fit_k2ae(const GramTable& k_in, std::vector<LayerSpec> inner_layers,
                 ScalarKernel last_kernel, double lambda_last, const TrainConfig& cfg) {
  std::vector<Index> dims;
  for (const LayerSpec& l : inner_layers) dims.push_back(l.dim);
  return fit_k2ae(k_in, std::move(inner_layers), last_kernel, lambda_last, cfg,
                  init_coefficients(cfg, k_in.size(), dims));
}

K2aeFit fit_k2ae(const GramTable& k_in, std::vector<LayerSpec> inner_layers,
                 ScalarKernel last_kernel, double lambda_last, const TrainConfig& cfg,
                 std::vector<Matrix> initial_coeffs) {
  if (inner_layers.empty()) throw std::invalid_argument("fit_k2ae: need at least one inner layer");
  if (!(lambda_last > 0.0)) {
    throw std::invalid_argument("fit_k2ae: the last layer's ridge weight must be positive");
  }
  if (cfg.epochs < 0) throw std::invalid_argument("fit_k2ae: negative epoch count");
  const Index n = k_in.size();
  if (n < 1) throw std::invalid_argument("fit_k2ae: empty Gram matrix");
  check_initial_coeffs("fit_k2ae", inner_layers, initial_coeffs, n);

  K2aeFit fit;
  fit.state.inner.layers = std::move(inner_layers);
  fit.state.inner.coeffs = std::move(initial_coeffs);
  fit.state.inner.induced_input = true;
  fit.state.last_kernel = last_kernel;
  fit.state.lambda_last = lambda_last;
  fit.state.k_in = k_in;
  fit.state.k_in_diag = k_in.diagonal();

  refresh_k2ae(fit.state, cfg.jitter);
  fit.trace.push_back(record_of(k2ae_objective(fit.state), 0));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const JacobianTable jt = jacobians(fit.state.inner);
    const std::vector<Matrix> grads = k2ae_inner_gradients(fit.state, jt);
    const double gamma = step_at(cfg, epoch);
    for (std::size_t l = 0; l < grads.size(); ++l) {
      fit.state.inner.coeffs[l] -= gamma * grads[l];
    }
    fit.state.touch();
    refresh_k2ae(fit.state, cfg.jitter);
    const Objective obj = k2ae_objective(fit.state);
    check_divergence(obj, epoch);
    fit.trace.push_back(record_of(obj, epoch));
  }
  return fit;
}

namespace {

/// Forwards test points (given as Gram rows against the training set) through
/// inner layers 1..upto of a kernelized model.
Matrix forward_induced_test(const K2aeState& state, const Matrix& k_test_train,
                            const Vector& k_test_diag, int upto) {
  const ModelState& inner = state.inner;
  if (k_test_train.cols() != inner.n()) {
    throw std::invalid_argument("test Gram rows do not match the training sample count");
  }
  if (k_test_train.rows() != k_test_diag.size()) {
    throw std::invalid_argument("test Gram diagonal length does not match the row count");
  }
  const LayerSpec& first = inner.layers[0];
  Matrix cur = gram_induced_cross(first.kernel, k_test_train, k_test_diag, state.k_in_diag) *
               inner.coeffs[0] * first.a_diag.asDiagonal();
  for (int l = 2; l <= upto; ++l) {
    cur = forward_layer(inner.layers[static_cast<std::size_t>(l - 1)],
                        inner.coeffs[static_cast<std::size_t>(l - 1)], cur,
                        inner.reps[static_cast<std::size_t>(l - 1)]);
  }
  return cur;
}

}  // namespace

Vector test_distortion(const K2aeState& state, const Matrix& k_test_train,
                       const Vector& k_test_diag) {
  const int depth = state.inner.depth();
  const Matrix last_reps = forward_induced_test(state, k_test_train, k_test_diag, depth);
  const Matrix k_test_last =
      gram(state.last_kernel, last_reps, state.inner.reps[static_cast<std::size_t>(depth)]);
  Vector out(k_test_train.rows());
  for (Index t = 0; t < k_test_train.rows(); ++t) {
    const Vector kv = k_test_last.row(t).transpose();
    const double quad = kv.dot(state.n_last * kv);
    const double cross = kv.dot(state.w_inv * k_test_train.row(t).transpose());
    out[t] = k_test_diag[t] + quad - 2.0 * cross;
  }
  return out;
}

int default_code_layer(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw std::invalid_argument("default_code_layer: no layers");
  int best = 1;
  for (int l = 2; l <= static_cast<int>(layers.size()); ++l) {
    if (layers[static_cast<std::size_t>(l - 1)].dim <
        layers[static_cast<std::size_t>(best - 1)].dim) {
      best = l;
    }
  }
  return best;
}

Matrix encode(const ModelState& state, const Matrix& inputs, int layer) {
  if (state.induced_input) {
    throw std::logic_error("encode: kernelized models take Gram rows, not raw inputs");
  }
  const int upto = layer == 0 ? default_code_layer(state.layers) : layer;
  if (upto < 1 || upto > state.depth()) {
    throw std::invalid_argument("encode: layer index out of range");
  }
  Matrix cur = inputs;
  for (int l = 1; l <= upto; ++l) {
    const Matrix& support = state.reps[static_cast<std::size_t>(l - 1)];
    if (support.rows() == 0) {
      throw std::logic_error("encode: missing support representations; run forward first");
    }
    cur = forward_layer(state.layers[static_cast<std::size_t>(l - 1)],
                        state.coeffs[static_cast<std::size_t>(l - 1)], cur, support);
  }
  return cur;
}

Matrix encode(const K2aeState& state, const Matrix& k_test_train, const Vector& k_test_diag,
              int layer) {
  const int upto = layer == 0 ? default_code_layer(state.inner.layers) : layer;
  if (upto < 1 || upto > state.inner.depth()) {
    throw std::invalid_argument("encode: layer index out of range");
  }
  return forward_induced_test(state, k_test_train, k_test_diag, upto);
}

}  // namespace kae
