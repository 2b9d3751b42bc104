#include "kae/gradients.hpp"

#include <stdexcept>
#include <string>

#include "kae/parallel.hpp"

namespace kae {

namespace {

void require_fresh(const ModelState& state, const char* op) {
  if (!state.fresh) {
    throw std::logic_error(std::string(op) + ": caches are stale; run forward first");
  }
}

}  // namespace

const Matrix& JacobianTable::at(int l, int l0, Index i, Index i0) const {
  if (l0 < 1 || l0 > depth_ || l < l0 || l > depth_) {
    throw std::invalid_argument("jacobian table: level pair (" + std::to_string(l) + "," +
                                std::to_string(l0) + ") out of range");
  }
  if (i < 0 || i >= n_ || i0 < 0 || i0 >= n_) {
    throw std::invalid_argument("jacobian table: sample index out of range");
  }
  return by_l0_[l0 - 1][l - l0][static_cast<std::size_t>(i * n_ + i0)];
}

JacobianTable jacobians(const ModelState& state) {
  require_fresh(state, "jacobians");
  const int depth = state.depth();
  const Index n = state.n();
  const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

  // Pairwise kernel gradients per level, needed by every recurrence step of
  // layer l >= 2.  (Layer 1's never appear: the base case is closed-form.)
  std::vector<std::vector<Matrix>> deltas(static_cast<std::size_t>(depth) + 1);
  for (int l = 2; l <= depth; ++l) deltas[l] = layer_deltas(state, l);

  JacobianTable jt;
  jt.depth_ = depth;
  jt.n_ = n;
  jt.by_l0_.resize(static_cast<std::size_t>(depth));

  for (int l0 = 1; l0 <= depth; ++l0) {
    auto& levels = jt.by_l0_[l0 - 1];
    levels.resize(static_cast<std::size_t>(depth - l0 + 1));
    const Vector& a0 = state.layers[l0 - 1].a_diag;
    const Matrix& k0 = state.grams[l0 - 1];

    // Base case: own layer, d/d phi_{l0,i0} of K_l0 Phi_l0 A_l0.
    levels[0].resize(nn);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t si) {
      const Index i = static_cast<Index>(si);
      for (Index i0 = 0; i0 < n; ++i0) {
        levels[0][static_cast<std::size_t>(i * n + i0)] =
            k0(i, i0) * Matrix(a0.asDiagonal());
      }
    });
    jt.built_ += nn;

    for (int l = l0 + 1; l <= depth; ++l) {
      const std::vector<Matrix>& prev = levels[l - 1 - l0];
      std::vector<Matrix>& cur = levels[l - l0];
      cur.resize(nn);
      const Matrix& phi = state.coeffs[l - 1];
      const Vector& a = state.layers[l - 1].a_diag;
      const std::vector<Matrix>& dl = deltas[l];
      parallel_for(static_cast<std::size_t>(n), [&](std::size_t si0) {
        const Index i0 = static_cast<Index>(si0);
        for (Index i = 0; i < n; ++i) {
          const Matrix& jprev_i = prev[static_cast<std::size_t>(i * n + i0)];
          Matrix acc = phi.transpose() * (dl[static_cast<std::size_t>(i)] * jprev_i);
          for (Index ip = 0; ip < n; ++ip) {
            const Matrix& jprev_ip = prev[static_cast<std::size_t>(ip * n + i0)];
            acc.noalias() += phi.row(ip).transpose() *
                             (dl[static_cast<std::size_t>(ip)].row(i) * jprev_ip);
          }
          cur[static_cast<std::size_t>(i * n + i0)] = a.asDiagonal() * acc;
        }
      });
      jt.built_ += nn;
    }
  }
  return jt;
}

std::vector<Matrix> kernel_pair_deltas(const ScalarKernel& kernel, const Matrix& points) {
  std::vector<Matrix> out(static_cast<std::size_t>(points.rows()));
  parallel_for(static_cast<std::size_t>(points.rows()), [&](std::size_t i) {
    out[i] = delta_matrix(kernel, points, static_cast<Index>(i));
  });
  return out;
}

std::vector<Matrix> layer_deltas(const ModelState& state, int l) {
  require_fresh(state, "layer_deltas");
  if (l < 1 || l > state.depth()) throw std::invalid_argument("layer_deltas: layer out of range");
  if (l == 1 && state.induced_input) {
    throw std::logic_error("layer_deltas: layer 1 of an induced model has no explicit inputs");
  }
  return kernel_pair_deltas(state.layers[l - 1].kernel, state.reps[l - 1]);
}

Matrix cross_accum(const JacobianTable& jt, const std::vector<Matrix>& deltas,
                   const Matrix& weights, int level, int l0) {
  const Index n = jt.n();
  if (static_cast<Index>(deltas.size()) != n || weights.rows() != n || weights.cols() != n) {
    throw std::invalid_argument("cross_accum: weights/deltas do not match the table");
  }
  // v_i = weights.row(i) * deltas[i], the coupling-weighted kernel gradient
  // sum at sample i; then row i0 = sum_i v_i * jac(level, l0, i, i0).
  const Index d_level = deltas.front().cols();
  Matrix v(n, d_level);
  for (Index i = 0; i < n; ++i) {
    v.row(i) = weights.row(i) * deltas[static_cast<std::size_t>(i)];
  }
  const Index d0 = jt.at(level, l0, 0, 0).cols();
  Matrix out = Matrix::Zero(n, d0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t si0) {
    const Index i0 = static_cast<Index>(si0);
    for (Index i = 0; i < n; ++i) {
      out.row(i0) += v.row(i) * jt.at(level, l0, i, i0);
    }
  });
  return out;
}

std::vector<Matrix> grad_distortion(const ModelState& state, const JacobianTable& jt) {
  require_fresh(state, "grad_distortion");
  if (state.induced_input) {
    throw std::logic_error("grad_distortion: model has an implicit input space");
  }
  const int depth = state.depth();
  const Index n = state.n();
  const Matrix& inputs = state.reps[0];
  const Matrix& out = state.reps[static_cast<std::size_t>(depth)];
  if (out.cols() != inputs.cols()) {
    throw std::invalid_argument("grad_distortion: last layer does not reconstruct the inputs");
  }
  const Matrix residual = inputs - out;
  std::vector<Matrix> grads(static_cast<std::size_t>(depth));
  for (int l0 = 1; l0 <= depth; ++l0) {
    Matrix g = Matrix::Zero(n, state.layers[l0 - 1].dim);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t si0) {
      const Index i0 = static_cast<Index>(si0);
      for (Index i = 0; i < n; ++i) {
        g.row(i0) += residual.row(i) * jt.at(depth, l0, i, i0);
      }
    });
    grads[static_cast<std::size_t>(l0 - 1)] = (-2.0 / static_cast<double>(n)) * g;
  }
  return grads;
}

Matrix grad_norm_own(const ModelState& state, int l) {
  require_fresh(state, "grad_norm_own");
  if (l < 1 || l > state.depth()) throw std::invalid_argument("grad_norm_own: layer out of range");
  return 2.0 * state.grams[l - 1] * state.coeffs[l - 1] *
         state.layers[l - 1].a_diag.asDiagonal();
}

Matrix grad_norm_cross(const ModelState& state, const JacobianTable& jt, int l, int l0) {
  require_fresh(state, "grad_norm_cross");
  if (l0 < 1 || l0 >= l || l > state.depth()) {
    throw std::invalid_argument("grad_norm_cross: need 1 <= l0 < l <= depth");
  }
  const Matrix& phi = state.coeffs[l - 1];
  const Matrix coupling = phi * state.layers[l - 1].a_diag.asDiagonal() * phi.transpose();
  return 2.0 * cross_accum(jt, layer_deltas(state, l), coupling, l - 1, l0);
}

std::vector<Matrix> full_gradient(const ModelState& state, const JacobianTable& jt) {
  require_fresh(state, "full_gradient");
  const int depth = state.depth();
  std::vector<Matrix> grads = grad_distortion(state, jt);
  for (int l0 = 1; l0 <= depth; ++l0) {
    const double lam = state.layers[l0 - 1].lambda;
    if (lam != 0.0) grads[static_cast<std::size_t>(l0 - 1)] += lam * grad_norm_own(state, l0);
  }
  for (int l = 2; l <= depth; ++l) {
    const double lam = state.layers[l - 1].lambda;
    if (lam == 0.0) continue;
    const std::vector<Matrix> deltas = layer_deltas(state, l);
    const Matrix& phi = state.coeffs[l - 1];
    const Matrix coupling = phi * state.layers[l - 1].a_diag.asDiagonal() * phi.transpose();
    for (int l0 = 1; l0 < l; ++l0) {
      grads[static_cast<std::size_t>(l0 - 1)] +=
          lam * 2.0 * cross_accum(jt, deltas, coupling, l - 1, l0);
    }
  }
  return grads;
}

std::vector<Matrix> fd_gradient(ModelState state, const Matrix& inputs, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  if (state.induced_input) {
    throw std::logic_error("fd_gradient: model has an implicit input space");
  }
  const int depth = state.depth();
  std::vector<Matrix> grads(static_cast<std::size_t>(depth));
  for (int l0 = 1; l0 <= depth; ++l0) {
    Matrix& phi = state.coeffs[static_cast<std::size_t>(l0 - 1)];
    Matrix g(phi.rows(), phi.cols());
    for (Index i0 = 0; i0 < phi.rows(); ++i0) {
      for (Index k = 0; k < phi.cols(); ++k) {
        const double saved = phi(i0, k);
        phi(i0, k) = saved + step;
        state.touch();
        forward_all(state, inputs);
        const double up = objective_finite(state, inputs).total;
        phi(i0, k) = saved - step;
        state.touch();
        forward_all(state, inputs);
        const double down = objective_finite(state, inputs).total;
        phi(i0, k) = saved;
        state.touch();
        g(i0, k) = (up - down) / (2.0 * step);
      }
    }
    grads[static_cast<std::size_t>(l0 - 1)] = std::move(g);
  }
  forward_all(state, inputs);
  return grads;
}

}  // namespace kae
