#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kae/gradients.hpp"
#include "kae/kernels.hpp"
#include "kae/layers.hpp"
#include "kae/rng.hpp"
#include "kae/types.hpp"

using kae::Index;
using kae::JacobianTable;
using kae::LayerSpec;
using kae::Matrix;
using kae::ModelState;
using kae::ScalarKernel;
using kae::Vector;

namespace {

Matrix random_matrix(kae::Rng& rng, Index r, Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

ModelState build_state(kae::Rng& rng, Index n, const std::vector<LayerSpec>& layers,
                       double coeff_scale = 0.5) {
  ModelState state;
  state.layers = layers;
  for (const LayerSpec& layer : layers) {
    state.coeffs.push_back(random_matrix(rng, n, layer.dim, coeff_scale));
  }
  return state;
}

void check_close(const std::vector<Matrix>& got, const std::vector<Matrix>& want, double rel_tol,
                 double abs_floor) {
  REQUIRE(got.size() == want.size());
  for (std::size_t l = 0; l < got.size(); ++l) {
    REQUIRE(got[l].rows() == want[l].rows());
    REQUIRE(got[l].cols() == want[l].cols());
    for (Index i = 0; i < got[l].rows(); ++i) {
      for (Index j = 0; j < got[l].cols(); ++j) {
        const double err = std::abs(got[l](i, j) - want[l](i, j));
        const double scale = std::max(std::abs(want[l](i, j)), abs_floor);
        INFO("layer ", l + 1, " entry (", i, ",", j, "): got ", got[l](i, j), " want ",
             want[l](i, j));
        CHECK(err <= rel_tol * scale);
      }
    }
  }
}

}  // namespace

TEST_CASE("full_gradient matches finite differences across a grid of models") {
  kae::Rng rng(51);
  const std::vector<std::vector<LayerSpec>> architectures = {
      {LayerSpec::make(ScalarKernel::gaussian(0.6), 2, 0.1),
       LayerSpec::make(ScalarKernel::gaussian(1.2), 3, 0.0)},
      {LayerSpec::make(ScalarKernel::polynomial(0.7, 0.4, 2), 2, 0.05),
       LayerSpec::make(ScalarKernel::gaussian(0.9), 3, 0.1)},
      {LayerSpec::make(ScalarKernel::gaussian(0.5), 3, 0.1),
       LayerSpec::make(ScalarKernel::polynomial(0.6, 1.0, 3), 2, 0.0),
       LayerSpec::make(ScalarKernel::gaussian(0.8), 4, 0.02)},
      {LayerSpec::make(ScalarKernel::linear(), 2, 0.1),
       LayerSpec::make(ScalarKernel::gaussian(0.7), 2, 0.1),
       LayerSpec::make(ScalarKernel::polynomial(1.1, 0.5, 2), 3, 0.0)},
  };
  for (const auto& layers : architectures) {
    for (Index n : {4, 8}) {
      ModelState state = build_state(rng, n, layers);
      const Matrix inputs = random_matrix(rng, n, layers.back().dim);
      forward_all(state, inputs);
      const JacobianTable jt = jacobians(state);
      const std::vector<Matrix> analytic = full_gradient(state, jt);
      const std::vector<Matrix> fd = fd_gradient(state, inputs, 1e-5);
      check_close(analytic, fd, 1e-5, 1e-8);
    }
  }
}

TEST_CASE("jacobian base case is the Gram entry times the operator diagonal") {
  kae::Rng rng(52);
  ModelState state = build_state(rng, 4,
                                 {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                  LayerSpec::make(ScalarKernel::gaussian(0.5), 3, 0.0)});
  state.layers[0].a_diag << 2.0, 0.5;
  const Matrix inputs = random_matrix(rng, 4, 3);
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  for (int l0 = 1; l0 <= state.depth(); ++l0) {
    const Matrix& k = state.grams[l0 - 1];
    for (Index i = 0; i < 4; ++i) {
      for (Index i0 = 0; i0 < 4; ++i0) {
        const Matrix expect =
            k(i, i0) * Matrix(state.layers[l0 - 1].a_diag.asDiagonal());
        CHECK((jt.at(l0, l0, i, i0) - expect).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("jacobian entries match finite differences of the forward pass") {
  kae::Rng rng(53);
  const std::vector<LayerSpec> layers = {
      LayerSpec::make(ScalarKernel::gaussian(0.7), 2, 0.0),
      LayerSpec::make(ScalarKernel::polynomial(0.8, 0.3, 2), 3, 0.0),
      LayerSpec::make(ScalarKernel::gaussian(0.4), 2, 0.0)};
  const Index n = 4;
  ModelState state = build_state(rng, n, layers);
  const Matrix inputs = random_matrix(rng, n, 2);
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  const double h = 1e-6;

  for (int l = 1; l <= state.depth(); ++l) {
    for (int l0 = 1; l0 <= l; ++l0) {
      for (Index i0 = 0; i0 < n; ++i0) {
        for (Index col = 0; col < state.layers[l0 - 1].dim; ++col) {
          // Perturb phi_{l0, i0, col} and watch every x_i^(l).
          ModelState up = state;
          up.coeffs[l0 - 1](i0, col) += h;
          up.touch();
          forward_all(up, inputs);
          ModelState down = state;
          down.coeffs[l0 - 1](i0, col) -= h;
          down.touch();
          forward_all(down, inputs);
          const Matrix fd = (up.reps[l] - down.reps[l]) / (2.0 * h);
          for (Index i = 0; i < n; ++i) {
            const Matrix& jac = jt.at(l, l0, i, i0);
            for (Index row = 0; row < jac.rows(); ++row) {
              const double err = std::abs(jac(row, col) - fd(i, row));
              CHECK(err <= 1e-5 * std::max(std::abs(fd(i, row)), 1e-3));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("jacobians above a zero layer vanish") {
  kae::Rng rng(54);
  ModelState state = build_state(rng, 3,
                                 {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                  LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0)});
  state.coeffs[1].setZero();  // layer 2 ignores its inputs entirely
  const Matrix inputs = random_matrix(rng, 3, 2);
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  // d x^(2) / d phi_1 flows only through layer 2's coefficients, all zero.
  for (Index i = 0; i < 3; ++i) {
    for (Index i0 = 0; i0 < 3; ++i0) {
      CHECK(jt.at(2, 1, i, i0).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("jacobian table size and bounds checks") {
  kae::Rng rng(55);
  const Index n = 5;
  ModelState state = build_state(rng, n,
                                 {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                  LayerSpec::make(ScalarKernel::gaussian(0.6), 3, 0.0),
                                  LayerSpec::make(ScalarKernel::gaussian(0.7), 2, 0.0)});
  const Matrix inputs = random_matrix(rng, n, 2);
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  CHECK(jt.depth() == 3);
  CHECK(jt.n() == n);
  CHECK(jt.entries_built() == static_cast<std::size_t>(n * n) * 3 * 4 / 2);

  CHECK_THROWS_AS(jt.at(0, 1, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(jt.at(4, 1, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(jt.at(2, 3, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(jt.at(2, 1, n, 0), std::invalid_argument);
  CHECK_THROWS_AS(jt.at(2, 1, 0, -1), std::invalid_argument);

  state.touch();
  CHECK_THROWS_AS(jacobians(state), std::logic_error);
}

TEST_CASE("grad_distortion vanishes at a perfect reconstruction") {
  // One point, one gaussian layer, phi = x reconstructs exactly; with zero
  // penalties the full gradient is the distortion gradient, which is zero
  // because the residual is zero.
  ModelState state;
  state.layers = {LayerSpec::make(ScalarKernel::gaussian(0.9), 2, 0.0)};
  Matrix point(1, 2);
  point << 2.0, -1.0;
  state.coeffs = {point};
  forward_all(state, point);
  const JacobianTable jt = jacobians(state);
  const std::vector<Matrix> g = grad_distortion(state, jt);
  REQUIRE(g.size() == 1);
  CHECK(g[0].cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("grad_norm_own closed form and finite differences") {
  // n = 1, K = [1], phi = 3: d(9)/dphi = 2 K phi = 6.
  ModelState state;
  state.layers = {LayerSpec::make(ScalarKernel::gaussian(0.5), 1, 0.0)};
  state.coeffs = {Matrix::Constant(1, 1, 3.0)};
  Matrix input(1, 1);
  input << 0.7;
  forward_all(state, input);
  CHECK(grad_norm_own(state, 1)(0, 0) == 6.0);

  // Random model: FD of layer_norm_sq(l) with respect to phi_l.  The Gram
  // K_l depends on earlier coefficients only, so plain perturbation works.
  kae::Rng rng(56);
  const Index n = 4;
  ModelState rnd = build_state(rng, n,
                               {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                LayerSpec::make(ScalarKernel::polynomial(0.9, 0.4, 2), 3, 0.0)});
  rnd.layers[1].a_diag << 1.5, 0.5, 2.0;
  const Matrix inputs = random_matrix(rng, n, 2);
  forward_all(rnd, inputs);
  const double h = 1e-6;
  for (int l = 1; l <= rnd.depth(); ++l) {
    const Matrix own = grad_norm_own(rnd, l);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < rnd.layers[l - 1].dim; ++j) {
        ModelState up = rnd;
        up.coeffs[l - 1](i, j) += h;
        up.touch();
        forward_all(up, inputs);
        ModelState down = rnd;
        down.coeffs[l - 1](i, j) -= h;
        down.touch();
        forward_all(down, inputs);
        // Freeze the Gram at the unperturbed value: perturbing phi_l also
        // moves X^(l) but not X^(l-1), hence K_l is unchanged.
        const double fd = (layer_norm_sq(up, l) - layer_norm_sq(down, l)) / (2.0 * h);
        CHECK(std::abs(own(i, j) - fd) <= 1e-6 * std::max(std::abs(fd), 1e-2));
      }
    }
  }
}

TEST_CASE("grad_norm_cross closed forms") {
  kae::Rng rng(57);
  const Index n = 3;

  // Zero coefficients in the later layer: its norm is identically zero no
  // matter what the earlier layer does.
  ModelState zero = build_state(rng, n,
                                {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                 LayerSpec::make(ScalarKernel::gaussian(0.7), 2, 0.0)});
  zero.coeffs[1].setZero();
  const Matrix inputs = random_matrix(rng, n, 2);
  forward_all(zero, inputs);
  JacobianTable jt = jacobians(zero);
  CHECK(grad_norm_cross(zero, jt, 2, 1).cwiseAbs().maxCoeff() == 0.0);

  // Identical layer-1 outputs for all samples: the gaussian deltas at layer 2
  // are grad1 at x = x', all zero, so nothing flows back.
  ModelState flat = build_state(rng, n,
                                {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                 LayerSpec::make(ScalarKernel::gaussian(0.7), 2, 0.0)});
  flat.coeffs[0].setZero();  // X^(1) = 0 for every sample
  forward_all(flat, inputs);
  jt = jacobians(flat);
  CHECK(grad_norm_cross(flat, jt, 2, 1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grad_norm_cross matches finite differences of the later norm") {
  kae::Rng rng(58);
  const Index n = 4;
  ModelState state = build_state(rng, n,
                                 {LayerSpec::make(ScalarKernel::gaussian(0.8), 2, 0.0),
                                  LayerSpec::make(ScalarKernel::polynomial(0.7, 0.5, 2), 3, 0.0)});
  const Matrix inputs = random_matrix(rng, n, 2);
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  const Matrix cross = grad_norm_cross(state, jt, 2, 1);
  const double h = 1e-6;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 2; ++j) {
      ModelState up = state;
      up.coeffs[0](i, j) += h;
      up.touch();
      forward_all(up, inputs);
      ModelState down = state;
      down.coeffs[0](i, j) -= h;
      down.touch();
      forward_all(down, inputs);
      const double fd = (layer_norm_sq(up, 2) - layer_norm_sq(down, 2)) / (2.0 * h);
      CHECK(std::abs(cross(i, j) - fd) <= 1e-5 * std::max(std::abs(fd), 1e-2));
    }
  }
}

TEST_CASE("full_gradient composition") {
  kae::Rng rng(59);
  const Index n = 4;

  // With all penalties zero the full gradient is exactly the distortion part.
  ModelState free = build_state(rng, n,
                                {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                 LayerSpec::make(ScalarKernel::gaussian(0.9), 3, 0.0)});
  const Matrix inputs = random_matrix(rng, n, 3);
  forward_all(free, inputs);
  JacobianTable jt = jacobians(free);
  const std::vector<Matrix> full = full_gradient(free, jt);
  const std::vector<Matrix> dist = grad_distortion(free, jt);
  for (std::size_t l = 0; l < full.size(); ++l) {
    CHECK((full[l] - dist[l]).cwiseAbs().maxCoeff() == 0.0);
  }

  // All-zero coefficients: every Jacobian that crosses a zero layer vanishes,
  // so earlier layers get no gradient, and the last layer's gradient reduces
  // to the base case contracted with the residual (which is the raw input,
  // since the reconstruction is zero).
  ModelState zero = build_state(rng, n,
                                {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.3),
                                 LayerSpec::make(ScalarKernel::gaussian(0.9), 3, 0.2)});
  for (Matrix& phi : zero.coeffs) phi.setZero();
  forward_all(zero, inputs);
  jt = jacobians(zero);
  const std::vector<Matrix> zg = full_gradient(zero, jt);
  CHECK(zg[0].cwiseAbs().maxCoeff() == 0.0);
  const Matrix expect_last =
      (-2.0 / static_cast<double>(n)) * zero.grams[1].transpose() * inputs *
      zero.layers[1].a_diag.asDiagonal();
  CHECK((zg[1] - expect_last).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("fd_gradient is exact on a quadratic objective") {
  // All-linear layers make the reconstruction linear in each layer's
  // coefficients, so the objective is quadratic per coordinate and central
  // differences are exact up to round-off.
  kae::Rng rng(60);
  const Index n = 3;
  ModelState state = build_state(rng, n, {LayerSpec::make(ScalarKernel::linear(), 2, 0.1)});
  const Matrix inputs = random_matrix(rng, n, 2);
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  const std::vector<Matrix> analytic = full_gradient(state, jt);
  const std::vector<Matrix> fd = fd_gradient(state, inputs, 1e-3);
  check_close(analytic, fd, 1e-9, 1e-6);
}

TEST_CASE("fd_gradient error shrinks quadratically in the step") {
  kae::Rng rng(61);
  const Index n = 3;
  ModelState state = build_state(rng, n,
                                 {LayerSpec::make(ScalarKernel::polynomial(0.6, 0.4, 2), 2, 0.1),
                                  LayerSpec::make(ScalarKernel::polynomial(0.5, 0.7, 2), 2, 0.0)});
  const Matrix inputs = random_matrix(rng, n, 2);
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  const std::vector<Matrix> analytic = full_gradient(state, jt);

  auto max_err = [&](double h) {
    const std::vector<Matrix> fd = fd_gradient(state, inputs, h);
    double worst = 0.0;
    for (std::size_t l = 0; l < fd.size(); ++l) {
      worst = std::max(worst, (fd[l] - analytic[l]).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  const double coarse = max_err(1e-2);
  const double fine = max_err(5e-3);
  CHECK(coarse > 0.0);
  // Central differences are second order: halving the step should cut the
  // error by about 4; allow slack for the cubic term.
  CHECK(fine <= coarse / 3.0);
  CHECK(fine >= coarse / 6.0);
}

TEST_CASE("gradient machinery rejects bad inputs") {
  kae::Rng rng(62);
  const Index n = 3;
  ModelState state = build_state(rng, n, {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0)});
  const Matrix inputs = random_matrix(rng, n, 2);

  CHECK_THROWS_AS(jacobians(state), std::logic_error);  // never forwarded
  forward_all(state, inputs);
  const JacobianTable jt = jacobians(state);
  CHECK_THROWS_AS(fd_gradient(state, inputs, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(fd_gradient(state, inputs, -1e-5), std::invalid_argument);

  state.touch();
  CHECK_THROWS_AS(grad_distortion(state, jt), std::logic_error);
  CHECK_THROWS_AS(grad_norm_own(state, 1), std::logic_error);
  CHECK_THROWS_AS(full_gradient(state, jt), std::logic_error);

  // layer_deltas on the induced first layer has no explicit inputs.
  ModelState induced = build_state(rng, n,
                                   {LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0),
                                    LayerSpec::make(ScalarKernel::gaussian(0.5), 2, 0.0)});
  induced.induced_input = true;
  forward_all_induced(induced, kae::GramTable(inputs * inputs.transpose(), false));
  CHECK_THROWS_WITH_AS(layer_deltas(induced, 1), doctest::Contains("induced"), std::logic_error);
  CHECK_NOTHROW(layer_deltas(induced, 2));
}
