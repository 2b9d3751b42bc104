#include "kae/kpca.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace kae {

namespace {

void check_components(const Vector& eigvals, int p) {
  if (p < 1) throw std::invalid_argument("component count must be >= 1");
  if (p > eigvals.size()) {
    throw std::invalid_argument("requested " + std::to_string(p) + " components from a " +
                                std::to_string(eigvals.size()) + "-sample Gram matrix");
  }
  const double floor = 1e-12 * eigvals[0];
  if (!(eigvals[p - 1] > floor)) {
    throw std::invalid_argument("requested components exceed the numerical rank of the Gram "
                                "matrix (eigenvalue " +
                                std::to_string(eigvals[p - 1]) + ")");
  }
}

}  // namespace

SpectralDecomposition spectral(const GramTable& k) {
  if (k.size() < 1) throw std::invalid_argument("spectral: empty Gram matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(k.matrix());
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("spectral: eigendecomposition failed to converge");
  }
  const Index n = k.size();
  SpectralDecomposition sd;
  sd.eigvals.resize(n);
  sd.eigvecs.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    // Solver output is ascending; present descending, clamped at 0.
    sd.eigvals[j] = std::max(0.0, es.eigenvalues()[n - 1 - j]);
    sd.eigvecs.col(j) = es.eigenvectors().col(n - 1 - j);
    Index arg = 0;
    for (Index i = 1; i < n; ++i) {
      if (std::abs(sd.eigvecs(i, j)) > std::abs(sd.eigvecs(arg, j))) arg = i;
    }
    if (sd.eigvecs(arg, j) < 0.0) sd.eigvecs.col(j) = -sd.eigvecs.col(j);
  }
  return sd;
}

Matrix kpca(const GramTable& k, int p, bool center) {
  const GramTable* source = &k;
  GramTable centered;
  if (center) {
    const Index n = k.size();
    const Matrix& km = k.matrix();
    const Vector row_mean = km.rowwise().mean();
    const double grand_mean = km.mean();
    Matrix c = km;
    c.colwise() -= row_mean;
    c.rowwise() -= row_mean.transpose();
    c.array() += grand_mean;
    // Centering preserves PSD; skip re-validation of the derived matrix.
    centered = GramTable(std::move(c), false);
    source = &centered;
  }
  const SpectralDecomposition sd = spectral(*source);
  check_components(sd.eigvals, p);
  Matrix out(k.size(), p);
  for (int j = 0; j < p; ++j) {
    out.col(j) = std::sqrt(sd.eigvals[j]) * sd.eigvecs.col(j);
  }
  return out;
}

LinearClosedForm k2ae_linear_closed_form(const GramTable& k, int p) {
  const SpectralDecomposition sd = spectral(k);
  check_components(sd.eigvals, p);
  LinearClosedForm out;
  out.codes.resize(k.size(), p);
  for (int j = 0; j < p; ++j) {
    out.codes.col(j) = std::pow(sd.eigvals[j], 0.25) * sd.eigvecs.col(j);
  }
  out.distortion = sd.eigvals.tail(sd.eigvals.size() - p).sum();
  out.eigvals = sd.eigvals;
  return out;
}

}  // namespace kae
