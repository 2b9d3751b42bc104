#include "kae/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "kae/parallel.hpp"
#include "kae/simd.hpp"

namespace kae {

namespace {

// base^e by repeated multiplication: exact for small integer degrees and
// bitwise reproducible, unlike std::pow.
double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

void check_dims(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("kernel arguments have mismatched dimensions: " +
                                std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
}

}  // namespace

ScalarKernel ScalarKernel::gaussian(double gamma) {
  ScalarKernel k;
  k.kind = KernelKind::gaussian;
  k.gamma = gamma;
  k.validate();
  return k;
}

ScalarKernel ScalarKernel::polynomial(double a, double b, int c) {
  ScalarKernel k;
  k.kind = KernelKind::polynomial;
  k.a = a;
  k.b = b;
  k.c = c;
  k.validate();
  return k;
}

ScalarKernel ScalarKernel::linear() { return polynomial(1.0, 0.0, 1); }

void ScalarKernel::validate() const {
  switch (kind) {
    case KernelKind::gaussian:
      if (!(gamma > 0.0)) throw std::invalid_argument("gaussian kernel requires gamma > 0");
      return;
    case KernelKind::polynomial:
      if (c < 1) throw std::invalid_argument("polynomial kernel requires degree c >= 1");
      if (a == 0.0) throw std::invalid_argument("polynomial kernel requires a != 0");
      return;
    case KernelKind::linear:
      return;
  }
  throw std::invalid_argument("unknown kernel kind");
}

double kernel_eval(const ScalarKernel& k, std::span<const double> x, std::span<const double> y) {
  check_dims(x, y);
  switch (k.kind) {
    case KernelKind::gaussian:
      return std::exp(-k.gamma * simd::sqdist(x, y));
    case KernelKind::polynomial:
      return ipow(k.a * simd::dot(x, y) + k.b, k.c);
    case KernelKind::linear:
      return simd::dot(x, y);
  }
  throw std::invalid_argument("unknown kernel kind");
}

void kernel_grad1(const ScalarKernel& k, std::span<const double> x, std::span<const double> y,
                  std::span<double> out) {
  check_dims(x, y);
  check_dims(x, out);
  switch (k.kind) {
    case KernelKind::gaussian: {
      const double s = -2.0 * k.gamma * std::exp(-k.gamma * simd::sqdist(x, y));
      for (std::size_t j = 0; j < x.size(); ++j) out[j] = s * (x[j] - y[j]);
      return;
    }
    case KernelKind::polynomial: {
      const double s = k.c * k.a * ipow(k.a * simd::dot(x, y) + k.b, k.c - 1);
      for (std::size_t j = 0; j < x.size(); ++j) out[j] = s * y[j];
      return;
    }
    case KernelKind::linear: {
      for (std::size_t j = 0; j < x.size(); ++j) out[j] = y[j];
      return;
    }
  }
  throw std::invalid_argument("unknown kernel kind");
}

Matrix gram(const ScalarKernel& k, const Matrix& rows, const Matrix& cols) {
  if (rows.cols() != cols.cols()) {
    throw std::invalid_argument("gram: point sets have mismatched dimensions");
  }
  k.validate();
  Matrix out(rows.rows(), cols.rows());
  parallel_for(static_cast<std::size_t>(rows.rows()), [&](std::size_t i) {
    const auto xi = row_span(rows, static_cast<Index>(i));
    for (Index j = 0; j < cols.rows(); ++j) {
      out(static_cast<Index>(i), j) = kernel_eval(k, xi, row_span(cols, j));
    }
  });
  return out;
}

Matrix delta_matrix(const ScalarKernel& k, const Matrix& points, Index i) {
  if (i < 0 || i >= points.rows()) {
    throw std::invalid_argument("delta_matrix: point index out of range");
  }
  Matrix out(points.rows(), points.cols());
  const auto xi = row_span(points, i);
  for (Index j = 0; j < points.rows(); ++j) {
    kernel_grad1(k, xi, row_span(points, j), row_span(out, j));
  }
  return out;
}

double gram_induced_eval(const ScalarKernel& k, double k_xx, double k_xy, double k_yy) {
  if (k_xx < 0.0 || k_yy < 0.0) {
    throw std::invalid_argument("gram_induced_eval: negative self inner product");
  }
  switch (k.kind) {
    case KernelKind::gaussian: {
      const double d2 = std::max(0.0, k_xx - 2.0 * k_xy + k_yy);
      return std::exp(-k.gamma * d2);
    }
    case KernelKind::polynomial:
      return ipow(k.a * k_xy + k.b, k.c);
    case KernelKind::linear:
      return k_xy;
  }
  throw std::invalid_argument("unknown kernel kind");
}

Matrix gram_induced(const ScalarKernel& k, const Matrix& k_in) {
  if (k_in.rows() != k_in.cols()) {
    throw std::invalid_argument("gram_induced: input Gram matrix must be square");
  }
  Matrix out(k_in.rows(), k_in.cols());
  parallel_for(static_cast<std::size_t>(k_in.rows()), [&](std::size_t si) {
    const Index i = static_cast<Index>(si);
    for (Index j = 0; j < k_in.cols(); ++j) {
      out(i, j) = gram_induced_eval(k, k_in(i, i), k_in(i, j), k_in(j, j));
    }
  });
  return out;
}

Matrix gram_induced_cross(const ScalarKernel& k, const Matrix& k_qs, const Vector& q_diag,
                          const Vector& s_diag) {
  if (k_qs.rows() != q_diag.size() || k_qs.cols() != s_diag.size()) {
    throw std::invalid_argument("gram_induced_cross: diagonal lengths do not match the block");
  }
  Matrix out(k_qs.rows(), k_qs.cols());
  for (Index t = 0; t < k_qs.rows(); ++t) {
    for (Index j = 0; j < k_qs.cols(); ++j) {
      out(t, j) = gram_induced_eval(k, q_diag[t], k_qs(t, j), s_diag[j]);
    }
  }
  return out;
}

GramTable::GramTable(Matrix entries, bool validate) {
  if (entries.rows() != entries.cols()) {
    throw std::invalid_argument("gram table must be square, got " +
                                std::to_string(entries.rows()) + "x" +
                                std::to_string(entries.cols()));
  }
  if (validate) {
    for (Index i = 0; i < entries.rows(); ++i) {
      if (entries(i, i) < 0.0) {
        throw std::invalid_argument("gram table has negative diagonal entry at " +
                                    std::to_string(i));
      }
      for (Index j = i + 1; j < entries.cols(); ++j) {
        const double diff = std::abs(entries(i, j) - entries(j, i));
        if (diff > 1e-12 * std::max({1.0, std::abs(entries(i, j)), std::abs(entries(j, i))})) {
          throw std::invalid_argument("gram table is not symmetric at (" + std::to_string(i) +
                                      "," + std::to_string(j) + ")");
        }
      }
    }
  }
  k_ = 0.5 * (entries + entries.transpose()).eval();
  if (validate && k_.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(k_, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    const double scale = std::max(std::abs(lo), std::abs(hi));
    if (lo < -1e-8 * scale) {
      throw std::invalid_argument("gram table is not positive semidefinite (min eigenvalue " +
                                  std::to_string(lo) + ")");
    }
  }
}

}  // namespace kae
