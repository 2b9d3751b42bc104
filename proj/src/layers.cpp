#include "kae/layers.hpp"

#include <stdexcept>
#include <string>

namespace kae {

LayerSpec LayerSpec::make(ScalarKernel kernel, Index dim, double lambda) {
  LayerSpec spec;
  spec.kernel = kernel;
  spec.dim = dim;
  spec.a_diag = Vector::Ones(dim);
  spec.lambda = lambda;
  spec.validate();
  return spec;
}

void LayerSpec::validate() const {
  kernel.validate();
  if (dim < 1) throw std::invalid_argument("layer dimension must be >= 1");
  if (a_diag.size() != dim) {
    throw std::invalid_argument("a_diag length " + std::to_string(a_diag.size()) +
                                " does not match layer dimension " + std::to_string(dim));
  }
  for (Index k = 0; k < a_diag.size(); ++k) {
    if (!(a_diag[k] > 0.0)) throw std::invalid_argument("a_diag entries must be positive");
  }
  if (lambda < 0.0) throw std::invalid_argument("layer lambda must be non-negative");
}

void ModelState::validate() const {
  if (layers.empty()) throw std::invalid_argument("model needs at least one layer");
  if (coeffs.size() != layers.size()) {
    throw std::invalid_argument("coefficient count does not match layer count");
  }
  const Index rows = coeffs.front().rows();
  if (rows < 1) throw std::invalid_argument("model needs at least one training sample");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (coeffs[l].rows() != rows) {
      throw std::invalid_argument("coefficients of layer " + std::to_string(l + 1) +
                                  " have inconsistent sample count");
    }
    if (coeffs[l].cols() != layers[l].dim) {
      throw std::invalid_argument("coefficients of layer " + std::to_string(l + 1) +
                                  " do not match the layer dimension");
    }
  }
}

Matrix forward_layer(const LayerSpec& layer, const Matrix& coeffs, const Matrix& inputs,
                     const Matrix& support) {
  layer.validate();
  if (inputs.cols() != support.cols()) {
    throw std::invalid_argument("forward_layer: inputs and support dimensions differ");
  }
  if (coeffs.rows() != support.rows() || coeffs.cols() != layer.dim) {
    throw std::invalid_argument("forward_layer: coefficient shape does not match");
  }
  return gram(layer.kernel, inputs, support) * coeffs * layer.a_diag.asDiagonal();
}

void forward_all(ModelState& state, const Matrix& inputs) {
  state.validate();
  if (state.induced_input) {
    throw std::logic_error("forward_all: model reads an input Gram; use forward_all_induced");
  }
  if (inputs.rows() != state.n()) {
    throw std::invalid_argument("forward_all: input row count does not match coefficients");
  }
  const int depth = state.depth();
  state.reps.assign(static_cast<std::size_t>(depth) + 1, Matrix());
  state.grams.assign(static_cast<std::size_t>(depth), Matrix());
  state.reps[0] = inputs;
  for (int l = 1; l <= depth; ++l) {
    const LayerSpec& spec = state.layers[l - 1];
    state.grams[l - 1] = gram(spec.kernel, state.reps[l - 1], state.reps[l - 1]);
    state.reps[l] = state.grams[l - 1] * state.coeffs[l - 1] * spec.a_diag.asDiagonal();
  }
  state.fresh = true;
}

void forward_all_induced(ModelState& state, const GramTable& k_in) {
  state.validate();
  if (k_in.size() != state.n()) {
    throw std::invalid_argument("forward_all_induced: Gram size does not match coefficients");
  }
  state.induced_input = true;
  const int depth = state.depth();
  state.reps.assign(static_cast<std::size_t>(depth) + 1, Matrix());
  state.grams.assign(static_cast<std::size_t>(depth), Matrix());
  state.grams[0] = gram_induced(state.layers[0].kernel, k_in.matrix());
  state.reps[1] = state.grams[0] * state.coeffs[0] * state.layers[0].a_diag.asDiagonal();
  for (int l = 2; l <= depth; ++l) {
    const LayerSpec& spec = state.layers[l - 1];
    state.grams[l - 1] = gram(spec.kernel, state.reps[l - 1], state.reps[l - 1]);
    state.reps[l] = state.grams[l - 1] * state.coeffs[l - 1] * spec.a_diag.asDiagonal();
  }
  state.fresh = true;
}

double layer_norm_sq(const ModelState& state, int l) {
  if (l < 1 || l > state.depth()) throw std::invalid_argument("layer_norm_sq: layer out of range");
  if (!state.fresh) throw std::logic_error("layer_norm_sq: caches are stale; run forward first");
  const Matrix& k = state.grams[l - 1];
  const Matrix& phi = state.coeffs[l - 1];
  const Vector& a = state.layers[l - 1].a_diag;
  // trace(K Phi A Phi^T) = sum_k a_k * <(K Phi)_k, Phi_k> over columns k.
  const Matrix kphi = k * phi;
  double norm = 0.0;
  for (Index col = 0; col < phi.cols(); ++col) {
    norm += a[col] * kphi.col(col).dot(phi.col(col));
  }
  return norm;
}

Objective objective_finite(const ModelState& state, const Matrix& inputs) {
  if (!state.fresh) throw std::logic_error("objective_finite: caches are stale; run forward first");
  if (state.induced_input) {
    throw std::logic_error("objective_finite: model has an implicit input space");
  }
  if (state.reps[0].rows() != inputs.rows() || state.reps[0].cols() != inputs.cols() ||
      (state.reps[0].array() != inputs.array()).any()) {
    throw std::invalid_argument("objective_finite: inputs differ from the forwarded inputs");
  }
  const Matrix& out = state.reps.back();
  if (out.cols() != inputs.cols()) {
    throw std::invalid_argument("objective_finite: last layer dimension " +
                                std::to_string(out.cols()) + " does not reconstruct inputs of " +
                                "dimension " + std::to_string(inputs.cols()));
  }
  Objective obj;
  obj.distortion = (inputs - out).squaredNorm() / static_cast<double>(inputs.rows());
  obj.total = obj.distortion;
  obj.norms.resize(static_cast<std::size_t>(state.depth()));
  for (int l = 1; l <= state.depth(); ++l) {
    obj.norms[l - 1] = layer_norm_sq(state, l);
    obj.total += state.layers[l - 1].lambda * obj.norms[l - 1];
  }
  return obj;
}

}  // namespace kae
